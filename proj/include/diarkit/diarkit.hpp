// diarkit/diarkit.hpp
//
// Copyright 2026 The diarkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef DIARKIT_DIARKIT_HPP
#define DIARKIT_DIARKIT_HPP

#include "diarkit/audio_io.hpp"
#include "diarkit/bilstm.hpp"
#include "diarkit/clustering.hpp"
#include "diarkit/common.hpp"
#include "diarkit/config.hpp"
#include "diarkit/der.hpp"
#include "diarkit/features.hpp"
#include "diarkit/linalg.hpp"
#include "diarkit/matrix.hpp"
#include "diarkit/nnet.hpp"
#include "diarkit/pipeline.hpp"
#include "diarkit/plda.hpp"
#include "diarkit/similarity.hpp"
#include "diarkit/sweep.hpp"
#include "diarkit/synthetic.hpp"
#include "diarkit/vad.hpp"
#include "diarkit/xvector.hpp"

#endif  // DIARKIT_DIARKIT_HPP
