#pragma once

#include "molmeta/autodiff.hpp"
#include "molmeta/cca.hpp"
#include "molmeta/config.hpp"
#include "molmeta/errors.hpp"
#include "molmeta/featurize.hpp"
#include "molmeta/fingerprint.hpp"
#include "molmeta/hash.hpp"
#include "molmeta/log.hpp"
#include "molmeta/metalearn.hpp"
#include "molmeta/metrics.hpp"
#include "molmeta/models.hpp"
#include "molmeta/optim.hpp"
#include "molmeta/params.hpp"
#include "molmeta/pipeline.hpp"
#include "molmeta/random.hpp"
#include "molmeta/reports.hpp"
#include "molmeta/scaffold.hpp"
#include "molmeta/smiles.hpp"
#include "molmeta/stats.hpp"
#include "molmeta/taskdata.hpp"
#include "molmeta/tensor.hpp"
