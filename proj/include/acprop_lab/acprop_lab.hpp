#pragma once

#include "acprop_lab/experiment.hpp"
#include "acprop_lab/kahan.hpp"
#include "acprop_lab/limits.hpp"
#include "acprop_lab/mlp.hpp"
#include "acprop_lab/optimizer.hpp"
#include "acprop_lab/problems.hpp"
#include "acprop_lab/rate.hpp"
#include "acprop_lab/report.hpp"
#include "acprop_lab/rng.hpp"
#include "acprop_lab/svg.hpp"
#include "acprop_lab/sweep.hpp"
#include "acprop_lab/trajectory.hpp"
#include "acprop_lab/zeta.hpp"
