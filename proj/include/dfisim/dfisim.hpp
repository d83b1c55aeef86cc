#pragma once

#include "dfisim/cfg.hpp"
#include "dfisim/checker.hpp"
#include "dfisim/collector.hpp"
#include "dfisim/error.hpp"
#include "dfisim/fifo.hpp"
#include "dfisim/float8.hpp"
#include "dfisim/info_word.hpp"
#include "dfisim/instrument.hpp"
#include "dfisim/interpreter.hpp"
#include "dfisim/mir.hpp"
#include "dfisim/optimizations.hpp"
#include "dfisim/packet.hpp"
#include "dfisim/pipeline.hpp"
#include "dfisim/rda.hpp"
#include "dfisim/report.hpp"
#include "dfisim/scenario.hpp"
#include "dfisim/violation.hpp"
