// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0
//
// Umbrella header.
#pragma once

#include "nerg/binary_io.hpp"
#include "nerg/checkpoint.hpp"
#include "nerg/commands.hpp"
#include "nerg/config.hpp"
#include "nerg/core.hpp"
#include "nerg/error.hpp"
#include "nerg/field.hpp"
#include "nerg/image_io.hpp"
#include "nerg/losses.hpp"
#include "nerg/manifest.hpp"
#include "nerg/model.hpp"
#include "nerg/probes.hpp"
#include "nerg/probes_io.hpp"
#include "nerg/render.hpp"
#include "nerg/scene_io.hpp"
#include "nerg/service.hpp"
#include "nerg/train.hpp"
