#pragma once

#include "qvhi/errors.hpp"
#include "qvhi/hilbert.hpp"
#include "qvhi/matrix_io.hpp"
#include "qvhi/convex.hpp"
#include "qvhi/clarke.hpp"
#include "qvhi/vi.hpp"
#include "qvhi/solver.hpp"
#include "qvhi/fem.hpp"
#include "qvhi/problems.hpp"
#include "qvhi/csv.hpp"
