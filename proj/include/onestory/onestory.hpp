#pragma once

#include "onestory/analysis.hpp"
#include "onestory/consolidation.hpp"
#include "onestory/core.hpp"
#include "onestory/corpus.hpp"
#include "onestory/encoder.hpp"
#include "onestory/interchange.hpp"
#include "onestory/ipca.hpp"
#include "onestory/reweighting.hpp"
#include "onestory/rng.hpp"
#include "onestory/story.hpp"
#include "onestory/svd.hpp"
#include "onestory/toy_denoiser.hpp"
#include "onestory/toy_encoder.hpp"
