// SPDX-License-Identifier: Apache-2.0
//
// Umbrella header.

#pragma once

#include "amdn/channel.hpp"
#include "amdn/dataset_io.hpp"
#include "amdn/eval.hpp"
#include "amdn/fusion.hpp"
#include "amdn/geometry.hpp"
#include "amdn/localizer.hpp"
#include "amdn/ncc.hpp"
#include "amdn/pipeline.hpp"
#include "amdn/regions.hpp"
#include "amdn/scenegen.hpp"
#include "amdn/segmentation_adcam.hpp"
#include "amdn/segmentation_cfr.hpp"
#include "amdn/union_find.hpp"
