#pragma once

#include "mnn/adjoint.hpp"
#include "mnn/error.hpp"
#include "mnn/fd_oracle.hpp"
#include "mnn/lattice.hpp"
#include "mnn/losses.hpp"
#include "mnn/pruning.hpp"
#include "mnn/statics.hpp"
#include "mnn/svg.hpp"
#include "mnn/tasks.hpp"
#include "mnn/trainer.hpp"
