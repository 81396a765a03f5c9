// SPDX-License-Identifier: Apache-2.0
//
// Scalar and argument types shared by every stage, plus launch signatures
// (the method-cache key: kernel name + ordered argument types).
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gridjit/errors.hpp"

namespace gridjit {

enum class ScalarType : std::uint8_t { I32, I64, F32, F64, Pred };

constexpr bool is_int(ScalarType t) { return t == ScalarType::I32 || t == ScalarType::I64; }
constexpr bool is_float(ScalarType t) { return t == ScalarType::F32 || t == ScalarType::F64; }
constexpr bool is_numeric(ScalarType t) { return t != ScalarType::Pred; }

constexpr std::size_t scalar_size(ScalarType t) {
    switch (t) {
        case ScalarType::I32:
        case ScalarType::F32: return 4;
        case ScalarType::I64:
        case ScalarType::F64: return 8;
        case ScalarType::Pred: return 1;
    }
    return 0;
}

constexpr std::string_view scalar_name(ScalarType t) {
    switch (t) {
        case ScalarType::I32: return "i32";
        case ScalarType::I64: return "i64";
        case ScalarType::F32: return "f32";
        case ScalarType::F64: return "f64";
        case ScalarType::Pred: return "pred";
    }
    return "?";
}

// Widening join within a family: i32->i64, f32->f64, pred only with pred.
// Returns false when the two types live in different families.
inline bool widen_join(ScalarType a, ScalarType b, ScalarType& out) {
    if (a == b) {
        out = a;
        return true;
    }
    if (is_int(a) && is_int(b)) {
        out = ScalarType::I64;
        return true;
    }
    if (is_float(a) && is_float(b)) {
        out = ScalarType::F64;
        return true;
    }
    return false;
}

// Launch-time argument type: a scalar or a rank-erased 1-D array. Array
// lengths are runtime data, never part of the type.
struct ArgType {
    enum class Kind : std::uint8_t { Scalar, Array };
    Kind kind = Kind::Scalar;
    ScalarType elem = ScalarType::I32;

    static ArgType scalar(ScalarType t) { return {Kind::Scalar, t}; }
    static ArgType array(ScalarType elem) { return {Kind::Array, elem}; }

    bool is_array() const { return kind == Kind::Array; }
    friend bool operator==(const ArgType&, const ArgType&) = default;

    std::string to_string() const {
        std::string s{scalar_name(elem)};
        if (kind == Kind::Array) s += "[]";
        return s;
    }
};

// Parses "i32", "f64", "f32[]", ... Returns false on anything else.
inline bool parse_arg_type(std::string_view text, ArgType& out) {
    bool array = false;
    if (text.size() > 2 && text.substr(text.size() - 2) == "[]") {
        array = true;
        text.remove_suffix(2);
    }
    ScalarType t;
    if (text == "i32") t = ScalarType::I32;
    else if (text == "i64") t = ScalarType::I64;
    else if (text == "f32") t = ScalarType::F32;
    else if (text == "f64") t = ScalarType::F64;
    else return false;
    out = array ? ArgType::array(t) : ArgType::scalar(t);
    return true;
}

struct Signature {
    std::string kernel;
    std::vector<ArgType> arg_types;

    friend bool operator==(const Signature&, const Signature&) = default;

    std::string to_string() const {
        std::string s = kernel + "(";
        for (std::size_t i = 0; i < arg_types.size(); ++i) {
            if (i) s += ",";
            s += arg_types[i].to_string();
        }
        return s + ")";
    }

    // FNV-1a over the rendered signature; stable across runs and platforms.
    std::uint64_t hash() const {
        std::uint64_t h = 14695981039346656037ull;
        for (char c : to_string()) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        return h;
    }

    std::string hash_hex() const {
        static const char digits[] = "0123456789abcdef";
        std::uint64_t h = hash();
        std::string s(16, '0');
        for (int i = 15; i >= 0; --i) {
            s[static_cast<std::size_t>(i)] = digits[h & 0xf];
            h >>= 4;
        }
        return s;
    }
};

inline Signature signature_of(std::string_view kernel, std::vector<ArgType> arg_types) {
    return Signature{std::string(kernel), std::move(arg_types)};
}

}  // namespace gridjit
