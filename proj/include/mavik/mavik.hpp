#pragma once

#include "mavik/coefficients.hpp"
#include "mavik/core.hpp"
#include "mavik/datasets.hpp"
#include "mavik/engine.hpp"
#include "mavik/errors.hpp"
#include "mavik/harness.hpp"
#include "mavik/linalg.hpp"
#include "mavik/postprocess.hpp"
#include "mavik/serialize.hpp"
