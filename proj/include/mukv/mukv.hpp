// Copyright 2026 The mukv Authors. All Rights Reserved.
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


#ifndef MUKV_MUKV_HPP_
#define MUKV_MUKV_HPP_

#include "mukv/block.hpp"
#include "mukv/bytes.hpp"
#include "mukv/config.hpp"
#include "mukv/core.hpp"
#include "mukv/dcp.hpp"
#include "mukv/engine.hpp"
#include "mukv/error.hpp"
#include "mukv/fft.hpp"
#include "mukv/granularity.hpp"
#include "mukv/record.hpp"
#include "mukv/retrieval.hpp"
#include "mukv/simbench.hpp"
#include "mukv/store.hpp"
#include "mukv/wire.hpp"

#endif  // MUKV_MUKV_HPP_
