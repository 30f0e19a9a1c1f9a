#pragma once

#include "kss/activation.hpp"
#include "kss/backbone.hpp"
#include "kss/checkpoint.hpp"
#include "kss/config.hpp"
#include "kss/diagnostics.hpp"
#include "kss/error.hpp"
#include "kss/experiment.hpp"
#include "kss/gcn.hpp"
#include "kss/graph.hpp"
#include "kss/ingest.hpp"
#include "kss/lateral.hpp"
#include "kss/metrics.hpp"
#include "kss/model.hpp"
#include "kss/synthetic.hpp"
#include "kss/tensor.hpp"
#include "kss/text.hpp"
#include "kss/train.hpp"
