// Copyright 2026 The PI-GNN Authors
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

#ifndef PIGNN_PIGNN_HPP_
#define PIGNN_PIGNN_HPP_

#include "pignn/adam.hpp"
#include "pignn/baselines.hpp"
#include "pignn/checkpoint.hpp"
#include "pignn/config.hpp"
#include "pignn/datagen.hpp"
#include "pignn/error.hpp"
#include "pignn/graph.hpp"
#include "pignn/io.hpp"
#include "pignn/metrics.hpp"
#include "pignn/model.hpp"
#include "pignn/rng.hpp"
#include "pignn/tensor.hpp"
#include "pignn/train.hpp"
#include "pignn/verify.hpp"

#endif  // PIGNN_PIGNN_HPP_
