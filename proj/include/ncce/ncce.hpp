#pragma once

#include "ncce/adam.hpp"
#include "ncce/chains.hpp"
#include "ncce/corpus.hpp"
#include "ncce/encoder.hpp"
#include "ncce/extractor.hpp"
#include "ncce/grid.hpp"
#include "ncce/lexicon.hpp"
#include "ncce/metrics.hpp"
#include "ncce/model.hpp"
#include "ncce/semantics.hpp"
#include "ncce/synth.hpp"
#include "ncce/tape.hpp"
#include "ncce/tensor.hpp"
#include "ncce/trainer.hpp"
