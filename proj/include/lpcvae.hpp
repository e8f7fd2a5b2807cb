#pragma once

#include "lpcvae/autodiff.hpp"
#include "lpcvae/commands.hpp"
#include "lpcvae/config.hpp"
#include "lpcvae/data.hpp"
#include "lpcvae/error.hpp"
#include "lpcvae/gradcheck_suite.hpp"
#include "lpcvae/model/checkpoint.hpp"
#include "lpcvae/model/config.hpp"
#include "lpcvae/model/gaussian.hpp"
#include "lpcvae/model/lpcvae.hpp"
#include "lpcvae/rng.hpp"
#include "lpcvae/scoring.hpp"
#include "lpcvae/spectral.hpp"
#include "lpcvae/training.hpp"
