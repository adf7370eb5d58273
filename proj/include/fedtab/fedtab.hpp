#pragma once

#include "fedtab/adaptation.hpp"
#include "fedtab/config.hpp"
#include "fedtab/dataset.hpp"
#include "fedtab/encoding.hpp"
#include "fedtab/experiment.hpp"
#include "fedtab/federation.hpp"
#include "fedtab/generator.hpp"
#include "fedtab/learner.hpp"
#include "fedtab/messages.hpp"
#include "fedtab/metrics.hpp"
#include "fedtab/payload.hpp"
#include "fedtab/report.hpp"
#include "fedtab/rng.hpp"
#include "fedtab/schema.hpp"
#include "fedtab/scorer.hpp"
#include "fedtab/serialization.hpp"
#include "fedtab/text_format.hpp"
