//*****************************************************************************
// Copyright 2026 The cxr Authors
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
//*****************************************************************************
#pragma once

#include "cxr/augmentation.hpp"
#include "cxr/backend.hpp"
#include "cxr/clahe.hpp"
#include "cxr/classifier.hpp"
#include "cxr/config.hpp"
#include "cxr/dataset.hpp"
#include "cxr/digest.hpp"
#include "cxr/errors.hpp"
#include "cxr/evaluation.hpp"
#include "cxr/image.hpp"
#include "cxr/pipeline.hpp"
#include "cxr/random.hpp"
#include "cxr/report.hpp"
#include "cxr/resize.hpp"
#include "cxr/store.hpp"
#include "cxr/version.hpp"
