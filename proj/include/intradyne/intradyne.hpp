// Umbrella header.
#pragma once

#include "intradyne/channel.hpp"
#include "intradyne/config.hpp"
#include "intradyne/dsp.hpp"
#include "intradyne/estimation.hpp"
#include "intradyne/experiment.hpp"
#include "intradyne/random.hpp"
#include "intradyne/receiver.hpp"
#include "intradyne/record_io.hpp"
#include "intradyne/report_io.hpp"
#include "intradyne/types.hpp"
#include "intradyne/wavegen.hpp"
