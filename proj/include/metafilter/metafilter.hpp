#pragma once

#include "metafilter/allocator.hpp"
#include "metafilter/dataset.hpp"
#include "metafilter/encoding.hpp"
#include "metafilter/geometry.hpp"
#include "metafilter/json_io.hpp"
#include "metafilter/metrics.hpp"
#include "metafilter/models.hpp"
#include "metafilter/nn/conv.hpp"
#include "metafilter/nn/norm.hpp"
#include "metafilter/nn/ops.hpp"
#include "metafilter/nn/optim.hpp"
#include "metafilter/nn/tensor.hpp"
#include "metafilter/pipeline.hpp"
#include "metafilter/surrogate.hpp"
#include "metafilter/types.hpp"
