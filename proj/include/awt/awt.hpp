#pragma once

#include "awt/cftree.hpp"
#include "awt/error.hpp"
#include "awt/evaluate.hpp"
#include "awt/features.hpp"
#include "awt/ikmeans.hpp"
#include "awt/pipeline.hpp"
#include "awt/preprocess.hpp"
#include "awt/wavelet.hpp"
