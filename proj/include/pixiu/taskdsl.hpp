#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "pixiu/crypto.hpp"
#include "pixiu/value.hpp"

namespace pixiu::taskdsl {

// The task language is a closed, I/O-free expression DSL: predicates over one
// record, plus clipped aggregates over a batch of records. Nothing in it can
// observe or mutate anything outside its input.

enum class CmpOp : uint8_t { Eq, Ne, Lt, Le, Gt, Ge };
enum class BoolOp : uint8_t { And, Or };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Kind : uint8_t {
        Literal,
        Path,
        Cmp,
        Bool,
        Not,
        Exists,  // exists(list_field, predicate)
        Count,   // count(predicate) over the batch
        Sum,     // sum(field, clip_lo, clip_hi) over the batch
        Mean,    // mean(field, clip_lo, clip_hi) over the batch
    };

    Kind kind;
    Value literal;                   // Literal
    std::vector<std::string> path;   // Path, Exists, Sum, Mean
    CmpOp cmp_op{};                  // Cmp
    BoolOp bool_op{};                // Bool
    ExprPtr lhs, rhs;                // Cmp, Bool; lhs also for Not/Exists/Count predicate
    double clip_lo = 0, clip_hi = 0; // Sum, Mean
};

struct SyntaxError : std::runtime_error {
    int line, column;
    SyntaxError(int line, int column, const std::string& msg)
        : std::runtime_error("syntax error at " + std::to_string(line) + ":" +
                             std::to_string(column) + ": " + msg),
          line(line), column(column) {}
};

struct EvalError : std::runtime_error {
    explicit EvalError(const std::string& what) : std::runtime_error(what) {}
};

struct MissingField : EvalError {
    std::string path;
    explicit MissingField(const std::string& p) : EvalError("missing field: " + p), path(p) {}
};

struct TypeMismatch : EvalError {
    explicit TypeMismatch(const std::string& what) : EvalError("type mismatch: " + what) {}
};

ExprPtr parse(std::string_view source);

// Predicate evaluation over a single record.
Value eval(const ExprPtr& expr, const Record& record);

// Evaluation where count/sum/mean range over the whole batch.
Value eval_batch(const ExprPtr& expr, const RecordList& batch);

// True if the root produces a batch aggregate rather than a per-record value.
bool is_aggregate(const ExprPtr& expr);

std::string print(const ExprPtr& expr);

Bytes encode_ast(const ExprPtr& expr);

// hash(canonical AST encoding); whitespace and comments in the source do not
// affect it.
Digest fn_digest(const ExprPtr& expr);

bool structurally_equal(const ExprPtr& a, const ExprPtr& b);

}  // namespace pixiu::taskdsl
