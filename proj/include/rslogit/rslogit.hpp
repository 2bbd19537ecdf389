#pragma once

#include "rslogit/core.hpp"
#include "rslogit/cv.hpp"
#include "rslogit/ddc.hpp"
#include "rslogit/enet.hpp"
#include "rslogit/format.hpp"
#include "rslogit/io.hpp"
#include "rslogit/labels.hpp"
#include "rslogit/lts.hpp"
#include "rslogit/network.hpp"
#include "rslogit/parallel.hpp"
#include "rslogit/quantiles.hpp"
#include "rslogit/random.hpp"
#include "rslogit/robust_stats.hpp"
#include "rslogit/synthetic.hpp"

namespace rslogit {
inline constexpr const char* kVersion = "0.1.0";
}
