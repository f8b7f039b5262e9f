// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "motrack/csv.hpp"
#include "motrack/dataset.hpp"
#include "motrack/eval.hpp"
#include "motrack/frames.hpp"
#include "motrack/motion_prompt.hpp"
#include "motrack/png_io.hpp"
#include "motrack/run_config.hpp"
#include "motrack/serialize.hpp"
#include "motrack/synthgen.hpp"
#include "motrack/track.hpp"
#include "motrack/tracker_net.hpp"
#include "motrack/train.hpp"
#include "motrack/visualize.hpp"
