// SPDX-License-Identifier: Apache-2.0
//
// The fixed intrinsic table. The parser checks names and arity against it;
// codegen owns the lowering rules keyed on IntrinsicKind.
//
// Coordinate intrinsics follow the source-language convention of 1-based
// indexing: thread/block ids lower to the 0-indexed special register plus 1.
// Dimension sizes (num_threads/num_blocks) are counts and stay unadjusted.
#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace gridjit {

enum class IntrinsicKind : std::uint8_t {
    CoordId,     // %tid/%ctaid special register + 1
    CoordSize,   // %ntid/%nctaid special register, unadjusted
    MathUnary,   // sqrt sin cos exp log abs
    MathBinary,  // min max
    MathTernary, // fma
    Barrier,     // statement-level; bar.sync
};

struct IntrinsicInfo {
    std::string_view name;
    IntrinsicKind kind;
    int arity;
    // CoordId/CoordSize: 0..2 = x..z; the special register family is implied
    // by the name (tid/ctaid vs ntid/nctaid).
    int axis = 0;
    bool block_level = false;  // ctaid/nctaid as opposed to tid/ntid
    bool float_only = false;   // sqrt/sin/cos/exp/log/fma
};

inline constexpr std::array<IntrinsicInfo, 22> kIntrinsics = {{
    {"thread_id_x", IntrinsicKind::CoordId, 0, 0, false},
    {"thread_id_y", IntrinsicKind::CoordId, 0, 1, false},
    {"thread_id_z", IntrinsicKind::CoordId, 0, 2, false},
    {"block_id_x", IntrinsicKind::CoordId, 0, 0, true},
    {"block_id_y", IntrinsicKind::CoordId, 0, 1, true},
    {"block_id_z", IntrinsicKind::CoordId, 0, 2, true},
    {"num_threads_x", IntrinsicKind::CoordSize, 0, 0, false},
    {"num_threads_y", IntrinsicKind::CoordSize, 0, 1, false},
    {"num_threads_z", IntrinsicKind::CoordSize, 0, 2, false},
    {"num_blocks_x", IntrinsicKind::CoordSize, 0, 0, true},
    {"num_blocks_y", IntrinsicKind::CoordSize, 0, 1, true},
    {"num_blocks_z", IntrinsicKind::CoordSize, 0, 2, true},
    {"barrier", IntrinsicKind::Barrier, 0},
    {"sqrt", IntrinsicKind::MathUnary, 1, 0, false, true},
    {"sin", IntrinsicKind::MathUnary, 1, 0, false, true},
    {"cos", IntrinsicKind::MathUnary, 1, 0, false, true},
    {"exp", IntrinsicKind::MathUnary, 1, 0, false, true},
    {"log", IntrinsicKind::MathUnary, 1, 0, false, true},
    {"abs", IntrinsicKind::MathUnary, 1},
    {"min", IntrinsicKind::MathBinary, 2},
    {"max", IntrinsicKind::MathBinary, 2},
    {"fma", IntrinsicKind::MathTernary, 3, 0, false, true},
}};

inline const IntrinsicInfo* find_intrinsic(std::string_view name) {
    for (const auto& info : kIntrinsics)
        if (info.name == name) return &info;
    return nullptr;
}

}  // namespace gridjit
