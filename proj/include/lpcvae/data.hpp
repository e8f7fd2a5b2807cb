#pragma once

#include "lpcvae/data/series.hpp"
#include "lpcvae/data/synth.hpp"
#include "lpcvae/data/windows.hpp"
