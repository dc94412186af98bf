#pragma once

#include "packorder/dataset.hpp"
#include "packorder/error.hpp"
#include "packorder/evaluate.hpp"
#include "packorder/label.hpp"
#include "packorder/metrics.hpp"
#include "packorder/planner.hpp"
#include "packorder/preference.hpp"
#include "packorder/provider.hpp"
#include "packorder/scoring.hpp"
#include "packorder/text_pipeline.hpp"
