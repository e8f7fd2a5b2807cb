#pragma once

#include "lpcvae/autodiff/adam.hpp"
#include "lpcvae/autodiff/gradcheck.hpp"
#include "lpcvae/autodiff/lstm.hpp"
#include "lpcvae/autodiff/ops.hpp"
#include "lpcvae/autodiff/tensor.hpp"
