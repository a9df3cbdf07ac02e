// Copyright 2026 The Authors.
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

#ifndef KPP_KPP_HPP_
#define KPP_KPP_HPP_

#include "kpp/error.hpp"
#include "kpp/oracle.hpp"
#include "kpp/patch_grid.hpp"
#include "kpp/patch_set.hpp"
#include "kpp/selector.hpp"
#include "kpp/set_function.hpp"
#include "kpp/submodular_lab.hpp"

#endif  // KPP_KPP_HPP_
