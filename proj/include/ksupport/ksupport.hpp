#pragma once

#include "ksupport/data.hpp"
#include "ksupport/dataset.hpp"
#include "ksupport/errors.hpp"
#include "ksupport/losses.hpp"
#include "ksupport/model_io.hpp"
#include "ksupport/modelsel.hpp"
#include "ksupport/norms.hpp"
#include "ksupport/solver.hpp"
#include "ksupport/version.hpp"
