// SPDX-License-Identifier: Apache-2.0
//
// Umbrella header for the full pipeline: kernel DSL -> type specialization ->
// VPTX codegen -> driver -> emulated device, plus the one-call launch facade.
#pragma once

#include "gridjit/ast.hpp"
#include "gridjit/autolaunch.hpp"
#include "gridjit/codegen.hpp"
#include "gridjit/driver.hpp"
#include "gridjit/emulator.hpp"
#include "gridjit/errors.hpp"
#include "gridjit/intrinsics.hpp"
#include "gridjit/parser.hpp"
#include "gridjit/printer.hpp"
#include "gridjit/specialize.hpp"
#include "gridjit/types.hpp"
#include "gridjit/vptx.hpp"
