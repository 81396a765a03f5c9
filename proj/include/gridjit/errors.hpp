// SPDX-License-Identifier: Apache-2.0
//
// Exception types for compile-stage and API-misuse failures. Run-time kernel
// faults are not exceptions; they travel as TrapInfo values (see emulator.hpp).
#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gridjit {

class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// ---- DSL frontend ----------------------------------------------------------

class SyntaxError : public Error {
  public:
    SyntaxError(int line, int column, const std::string& msg)
        : Error("SyntaxError at " + std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
          line(line), column(column) {}
    int line;
    int column;
};

class DuplicateName : public Error {
  public:
    DuplicateName(int line, const std::string& name)
        : Error("DuplicateName at line " + std::to_string(line) + ": '" + name + "'"), line(line), name(name) {}
    int line;
    std::string name;
};

class UnknownIntrinsic : public Error {
  public:
    UnknownIntrinsic(int line, const std::string& name)
        : Error("UnknownIntrinsic at line " + std::to_string(line) + ": '" + name + "'"), line(line), name(name) {}
    int line;
    std::string name;
};

class ArityError : public Error {
  public:
    ArityError(const std::string& what, int expected, int got)
        : Error("ArityError: " + what + " expects " + std::to_string(expected) + " argument(s), got " +
                std::to_string(got)),
          expected(expected), got(got) {}
    int expected;
    int got;
};

// ---- Specializer -----------------------------------------------------------

class TypeMismatch : public Error {
  public:
    explicit TypeMismatch(const std::string& where) : Error("TypeMismatch: " + where) {}
};

class IndexTypeError : public Error {
  public:
    explicit IndexTypeError(const std::string& where) : Error("IndexTypeError: " + where) {}
};

// A local would need two incompatible types on different paths: the value
// could not be represented natively and specialization aborts.
class UnresolvedType : public Error {
  public:
    UnresolvedType(std::string local, std::vector<std::string> types)
        : Error(format(local, types)), local(std::move(local)), conflicting(std::move(types)) {}
    std::string local;
    std::vector<std::string> conflicting;

  private:
    static std::string format(const std::string& local, const std::vector<std::string>& types) {
        std::string s = "UnresolvedType: local '" + local + "' has conflicting types {";
        for (std::size_t i = 0; i < types.size(); ++i) {
            if (i) s += ", ";
            s += types[i];
        }
        return s + "}";
    }
};

// ---- Codegen ---------------------------------------------------------------

class LoweringError : public Error {
  public:
    explicit LoweringError(const std::string& msg) : Error("LoweringError: " + msg) {}
};

// ---- VPTX ------------------------------------------------------------------

class VptxSyntaxError : public Error {
  public:
    VptxSyntaxError(int line, const std::string& msg)
        : Error("VptxSyntaxError at line " + std::to_string(line) + ": " + msg), line(line) {}
    int line;
};

// ---- Driver ----------------------------------------------------------------

class ContextDestroyed : public Error {
  public:
    ContextDestroyed() : Error("ContextDestroyed: operation on a destroyed context") {}
};

class ValidationFailed : public Error {
  public:
    explicit ValidationFailed(std::vector<std::string> diags)
        : Error(format(diags)), diagnostics(std::move(diags)) {}
    std::vector<std::string> diagnostics;

  private:
    static std::string format(const std::vector<std::string>& diags) {
        std::string s = "ValidationFailed:";
        for (const auto& d : diags) s += "\n  " + d;
        return s;
    }
};

class FunctionNotFound : public Error {
  public:
    explicit FunctionNotFound(const std::string& name) : Error("FunctionNotFound: '" + name + "'") {}
};

class OutOfBounds : public Error {
  public:
    explicit OutOfBounds(const std::string& what) : Error("OutOfBounds: " + what) {}
};

class DoubleFree : public Error {
  public:
    DoubleFree() : Error("DoubleFree: device pointer already freed") {}
};

class UseAfterFree : public Error {
  public:
    UseAfterFree() : Error("UseAfterFree: device pointer no longer live") {}
};

class ArgumentMismatch : public Error {
  public:
    explicit ArgumentMismatch(const std::string& what) : Error("ArgumentMismatch: " + what) {}
};

class LaunchConfigError : public Error {
  public:
    explicit LaunchConfigError(const std::string& what) : Error("LaunchConfigError: " + what) {}
};

}  // namespace gridjit
