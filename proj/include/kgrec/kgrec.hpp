#pragma once

#include "kgrec/checkpoint.hpp"
#include "kgrec/context.hpp"
#include "kgrec/error.hpp"
#include "kgrec/evaluation.hpp"
#include "kgrec/graph.hpp"
#include "kgrec/image_embedding.hpp"
#include "kgrec/kg_loss.hpp"
#include "kgrec/kg_model.hpp"
#include "kgrec/kg_train.hpp"
#include "kgrec/parallel.hpp"
#include "kgrec/pca.hpp"
#include "kgrec/random.hpp"
#include "kgrec/triple_store.hpp"
