#include "pixiu/value.hpp"

#include "pixiu/codec.hpp"

namespace pixiu {

namespace {
enum Tag : uint8_t { kInt = 1, kFloat = 2, kString = 3, kBool = 4, kList = 5, kVec = 6 };
}

std::string Value::type_name() const {
    switch (v_.index()) {
        case 0: return "int";
        case 1: return "float";
        case 2: return "string";
        case 3: return "bool";
        case 4: return "list";
        case 5: return "vec";
    }
    return "?";
}

static void encode_value_into(Encoder& enc, const Value& v);

static void encode_record_into(Encoder& enc, const Record& r) {
    enc.list_count(r.size());
    for (const auto& [k, v] : r) {
        enc.str(k);
        encode_value_into(enc, v);
    }
}

static void encode_value_into(Encoder& enc, const Value& v) {
    if (v.is_int()) {
        enc.u8(kInt);
        enc.i64(v.as_int());
    } else if (v.is_float()) {
        enc.u8(kFloat);
        enc.f64(v.as_float());
    } else if (v.is_string()) {
        enc.u8(kString);
        enc.str(v.as_string());
    } else if (v.is_bool()) {
        enc.u8(kBool);
        enc.boolean(v.as_bool());
    } else if (v.is_list()) {
        enc.u8(kList);
        enc.list_count(v.as_list().size());
        for (const Record& r : v.as_list()) encode_record_into(enc, r);
    } else {
        enc.u8(kVec);
        enc.list_count(v.as_vec().size());
        for (double d : v.as_vec()) enc.f64(d);
    }
}

static Value decode_value_from(Decoder& dec);

static Record decode_record_from(Decoder& dec) {
    Record r;
    size_t n = dec.list_count();
    for (size_t i = 0; i < n; ++i) {
        std::string key = dec.str();
        r.emplace(std::move(key), decode_value_from(dec));
    }
    return r;
}

static Value decode_value_from(Decoder& dec) {
    switch (dec.u8()) {
        case kInt: return Value(dec.i64());
        case kFloat: return Value(dec.f64());
        case kString: return Value(dec.str());
        case kBool: return Value(dec.boolean());
        case kList: {
            RecordList l(dec.list_count());
            for (Record& r : l) r = decode_record_from(dec);
            return Value(std::move(l));
        }
        case kVec: {
            FloatVec v(dec.list_count());
            for (double& d : v) d = dec.f64();
            return Value(std::move(v));
        }
        default: throw DecodeError("unknown value tag");
    }
}

Bytes encode_value(const Value& v) {
    Encoder enc;
    encode_value_into(enc, v);
    return enc.take();
}

Value decode_value(BytesView data) {
    Decoder dec(data);
    Value v = decode_value_from(dec);
    dec.expect_done();
    return v;
}

Bytes encode_record(const Record& r) {
    Encoder enc;
    encode_record_into(enc, r);
    return enc.take();
}

Record decode_record(BytesView data) {
    Decoder dec(data);
    Record r = decode_record_from(dec);
    dec.expect_done();
    return r;
}

Bytes encode_record_list(const RecordList& l) {
    Encoder enc;
    enc.list_count(l.size());
    for (const Record& r : l) encode_record_into(enc, r);
    return enc.take();
}

RecordList decode_record_list(BytesView data) {
    Decoder dec(data);
    RecordList l(dec.list_count());
    for (Record& r : l) r = decode_record_from(dec);
    dec.expect_done();
    return l;
}

Value value_from_json(const nlohmann::json& j) {
    if (j.is_boolean()) return Value(j.get<bool>());
    if (j.is_number_integer()) return Value(j.get<int64_t>());
    if (j.is_number_float()) return Value(j.get<double>());
    if (j.is_string()) return Value(j.get<std::string>());
    if (j.is_array()) {
        if (!j.empty() && j.front().is_number()) {
            FloatVec v;
            for (const auto& e : j) v.push_back(e.get<double>());
            return Value(std::move(v));
        }
        RecordList l;
        for (const auto& e : j) {
            Record r;
            for (auto it = e.begin(); it != e.end(); ++it)
                r.emplace(it.key(), value_from_json(it.value()));
            l.push_back(std::move(r));
        }
        return Value(std::move(l));
    }
    throw std::invalid_argument("unsupported JSON value for record field");
}

nlohmann::json value_to_json(const Value& v) {
    using nlohmann::json;
    if (v.is_int()) return v.as_int();
    if (v.is_float()) return v.as_float();
    if (v.is_string()) return v.as_string();
    if (v.is_bool()) return v.as_bool();
    if (v.is_vec()) return v.as_vec();
    json arr = json::array();
    for (const Record& r : v.as_list()) {
        json obj = json::object();
        for (const auto& [k, field] : r) obj[k] = value_to_json(field);
        arr.push_back(std::move(obj));
    }
    return arr;
}

}  // namespace pixiu
