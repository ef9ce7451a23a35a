// Copyright 2026 The nestterm Authors.
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

#include "nestterm/biencoder.hpp"
#include "nestterm/corpus.hpp"
#include "nestterm/damage_cv.hpp"
#include "nestterm/eval.hpp"
#include "nestterm/experiment.hpp"
#include "nestterm/pseudolabel.hpp"
#include "nestterm/rng.hpp"
#include "nestterm/runner.hpp"
#include "nestterm/span_algebra.hpp"
#include "nestterm/stats.hpp"
#include "nestterm/synthetic.hpp"
#include "nestterm/tagger.hpp"
#include "nestterm/utf8.hpp"
