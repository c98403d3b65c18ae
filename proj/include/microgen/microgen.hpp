#pragma once

#include "microgen/error.hpp"
#include "microgen/gan/architecture.hpp"
#include "microgen/gan/evaluate.hpp"
#include "microgen/gan/generate.hpp"
#include "microgen/gan/latent.hpp"
#include "microgen/gan/losses.hpp"
#include "microgen/gan/train.hpp"
#include "microgen/metrics.hpp"
#include "microgen/nn/activations.hpp"
#include "microgen/nn/adam.hpp"
#include "microgen/nn/batchnorm.hpp"
#include "microgen/nn/conv.hpp"
#include "microgen/nn/sequential.hpp"
#include "microgen/nn/tensor.hpp"
#include "microgen/nn/weights_io.hpp"
#include "microgen/parallel.hpp"
#include "microgen/transport.hpp"
#include "microgen/volume_io.hpp"
#include "microgen/voxel_grid.hpp"
