#pragma once

#include "scnn/error.hpp"
#include "scnn/random.hpp"
#include "scnn/tensor.hpp"
#include "scnn/layers.hpp"
#include "scnn/gradcheck.hpp"
#include "scnn/network.hpp"
#include "scnn/checkpoint.hpp"
#include "scnn/contrastive.hpp"
#include "scnn/adam.hpp"
#include "scnn/pairs.hpp"
#include "scnn/trainer.hpp"
#include "scnn/image.hpp"
#include "scnn/png_io.hpp"
#include "scnn/preprocess.hpp"
#include "scnn/augment.hpp"
#include "scnn/synthetic.hpp"
#include "scnn/retrieval.hpp"
#include "scnn/metrics.hpp"
#include "scnn/projection.hpp"
#include "scnn/manifest.hpp"
#include "scnn/config.hpp"
#include "scnn/pipeline.hpp"
