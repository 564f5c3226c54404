#pragma once

#include "abba/linear_operator.hpp"
#include "abba/ct_model.hpp"
#include "abba/arnoldi.hpp"
#include "abba/regparam.hpp"
#include "abba/stopping.hpp"
#include "abba/metrics.hpp"
#include "abba/solver.hpp"
#include "abba/gmres.hpp"
#include "abba/golub_kahan.hpp"
#include "abba/image_io.hpp"
