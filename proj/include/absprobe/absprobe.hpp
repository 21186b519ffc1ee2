#pragma once

#include "absprobe/common.hpp"
#include "absprobe/parallel.hpp"
#include "absprobe/grammar.hpp"
#include "absprobe/dataset.hpp"
#include "absprobe/grammar_pair.hpp"
#include "absprobe/mutations.hpp"
#include "absprobe/cogs.hpp"
#include "absprobe/flt_probe.hpp"
#include "absprobe/logic_probe.hpp"
#include "absprobe/metrics.hpp"
#include "absprobe/dataset_io.hpp"
#include "absprobe/cli.hpp"
