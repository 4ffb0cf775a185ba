#pragma once

#include "fen/core/adam.hpp"
#include "fen/core/checkpoint.hpp"
#include "fen/core/error.hpp"
#include "fen/core/tape.hpp"
#include "fen/core/tensor.hpp"
#include "fen/data/csv.hpp"
#include "fen/data/date.hpp"
#include "fen/data/features.hpp"
#include "fen/data/prices.hpp"
#include "fen/data/regimes.hpp"
#include "fen/data/samples_csv.hpp"
#include "fen/ltr/ranking.hpp"
#include "fen/ltr/sample.hpp"
#include "fen/models/encoder.hpp"
#include "fen/models/layers.hpp"
#include "fen/models/rankers.hpp"
#include "fen/backtest/engine.hpp"
#include "fen/train/parallel.hpp"
#include "fen/train/search.hpp"
#include "fen/train/selection.hpp"
#include "fen/train/trainer.hpp"
#include "fen/train/windows.hpp"
#include "fen/report/heatmaps.hpp"
#include "fen/report/segmented.hpp"
#include "fen/report/tables.hpp"
