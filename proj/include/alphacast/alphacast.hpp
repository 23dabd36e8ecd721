#pragma once

#include "alphacast/agents.hpp"
#include "alphacast/backend.hpp"
#include "alphacast/baselines.hpp"
#include "alphacast/caselib.hpp"
#include "alphacast/config.hpp"
#include "alphacast/core.hpp"
#include "alphacast/errors.hpp"
#include "alphacast/eval.hpp"
#include "alphacast/features.hpp"
#include "alphacast/grounding.hpp"
#include "alphacast/hash.hpp"
#include "alphacast/ingest.hpp"
#include "alphacast/kmeans.hpp"
#include "alphacast/knowledge.hpp"
#include "alphacast/synthetic.hpp"
#include "alphacast/time.hpp"
