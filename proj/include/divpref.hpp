// Copyright 2026 The divpref Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include "divpref/analysis.hpp"
#include "divpref/core.hpp"
#include "divpref/error.hpp"
#include "divpref/experiment.hpp"
#include "divpref/gridworld.hpp"
#include "divpref/instances.hpp"
#include "divpref/io.hpp"
#include "divpref/maxmin.hpp"
#include "divpref/policy.hpp"
#include "divpref/random.hpp"
#include "divpref/reward.hpp"
#include "divpref/simplex.hpp"
#include "divpref/synthpop.hpp"
