#pragma once

// Umbrella header for the campfin library.

#include "campfin/benford.hpp"
#include "campfin/donmodel.hpp"
#include "campfin/ingest.hpp"
#include "campfin/logit.hpp"
#include "campfin/money.hpp"
#include "campfin/numerics.hpp"
#include "campfin/pipeline.hpp"
#include "campfin/report.hpp"
#include "campfin/stats.hpp"
