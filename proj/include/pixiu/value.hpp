#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "pixiu/bytes.hpp"

namespace pixiu {

class Value;

// One datum as stored in a POD: a flat-ish map of named fields.
using Record = std::map<std::string, Value>;

// A batch of records, the unit that flows through a pipeline.
using RecordList = std::vector<Record>;

// Fixed-length float vector (model parameters for the aggregation lambda).
using FloatVec = std::vector<double>;

class Value {
public:
    using Variant = std::variant<int64_t, double, std::string, bool, RecordList, FloatVec>;

    Value() : v_(int64_t{0}) {}
    Value(int64_t i) : v_(i) {}
    Value(double d) : v_(d) {}
    Value(std::string s) : v_(std::move(s)) {}
    Value(const char* s) : v_(std::string(s)) {}
    Value(bool b) : v_(b) {}
    Value(RecordList l) : v_(std::move(l)) {}
    Value(FloatVec v) : v_(std::move(v)) {}

    bool is_int() const { return std::holds_alternative<int64_t>(v_); }
    bool is_float() const { return std::holds_alternative<double>(v_); }
    bool is_string() const { return std::holds_alternative<std::string>(v_); }
    bool is_bool() const { return std::holds_alternative<bool>(v_); }
    bool is_list() const { return std::holds_alternative<RecordList>(v_); }
    bool is_vec() const { return std::holds_alternative<FloatVec>(v_); }
    bool is_numeric() const { return is_int() || is_float(); }

    int64_t as_int() const { return std::get<int64_t>(v_); }
    double as_float() const { return std::get<double>(v_); }
    const std::string& as_string() const { return std::get<std::string>(v_); }
    bool as_bool() const { return std::get<bool>(v_); }
    const RecordList& as_list() const { return std::get<RecordList>(v_); }
    const FloatVec& as_vec() const { return std::get<FloatVec>(v_); }

    // Numeric value widened to double (int or float).
    double as_number() const { return is_int() ? static_cast<double>(as_int()) : as_float(); }

    const Variant& variant() const { return v_; }
    std::string type_name() const;

    bool operator==(const Value& other) const = default;

private:
    Variant v_;
};

// Canonical encoding (tag byte + payload); hash(encode(v)) is stable across
// processes and runs.
Bytes encode_value(const Value& v);
Value decode_value(BytesView data);

Bytes encode_record(const Record& r);
Record decode_record(BytesView data);

Bytes encode_record_list(const RecordList& l);
RecordList decode_record_list(BytesView data);

// JSON bridge for fixture files and machine-readable reports.
Value value_from_json(const nlohmann::json& j);
nlohmann::json value_to_json(const Value& v);

}  // namespace pixiu
