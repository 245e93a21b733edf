#ifndef ASTN_ASTN_HPP
#define ASTN_ASTN_HPP

#include "astn/checkpoint.hpp"
#include "astn/config.hpp"
#include "astn/conv.hpp"
#include "astn/fusion.hpp"
#include "astn/halfstn.hpp"
#include "astn/image.hpp"
#include "astn/metrics.hpp"
#include "astn/optim.hpp"
#include "astn/pgm.hpp"
#include "astn/phantom.hpp"
#include "astn/pipeline.hpp"
#include "astn/rcs.hpp"
#include "astn/rng.hpp"
#include "astn/sampling.hpp"
#include "astn/tensor.hpp"
#include "astn/unet.hpp"

#endif
