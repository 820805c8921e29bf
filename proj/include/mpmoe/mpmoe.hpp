#pragma once

#include "mpmoe/dataset.hpp"
#include "mpmoe/error.hpp"
#include "mpmoe/gating.hpp"
#include "mpmoe/loss.hpp"
#include "mpmoe/matrix_profile.hpp"
#include "mpmoe/metrics.hpp"
#include "mpmoe/panel.hpp"
#include "mpmoe/synthetic.hpp"
#include "mpmoe/trainer.hpp"
#include "mpmoe/serialization.hpp"
