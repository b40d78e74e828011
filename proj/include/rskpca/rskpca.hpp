#pragma once

// Convenience header pulling in the whole library.

#include "rskpca/dataio.hpp"
#include "rskpca/dataset.hpp"
#include "rskpca/error.hpp"
#include "rskpca/eval.hpp"
#include "rskpca/kernels.hpp"
#include "rskpca/kpca.hpp"
#include "rskpca/metrics.hpp"
#include "rskpca/numerics.hpp"
#include "rskpca/reduced_set.hpp"
#include "rskpca/rsde.hpp"
