#include "pixiu/taskdsl.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "pixiu/codec.hpp"

namespace pixiu::taskdsl {

// --- lexer ---

namespace {

enum class Tok : uint8_t {
    End, Ident, Int, Float, Str, True, False,
    And, Or, Not, Exists, Count, Sum, Mean,
    Eq, Ne, Lt, Le, Gt, Ge,
    LParen, RParen, Comma, Dot,
};

struct Token {
    Tok kind;
    std::string text;
    int64_t ival = 0;
    double fval = 0;
    int line = 1, col = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) { advance(); }

    const Token& peek() const { return cur_; }

    Token next() {
        Token t = cur_;
        advance();
        return t;
    }

private:
    void advance() { cur_ = lex(); }

    [[noreturn]] void fail(const std::string& msg) const { throw SyntaxError(line_, col_, msg); }

    int getc() {
        if (pos_ >= src_.size()) return -1;
        char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return static_cast<unsigned char>(c);
    }

    int look() const { return pos_ < src_.size() ? static_cast<unsigned char>(src_[pos_]) : -1; }

    Token lex() {
        for (;;) {
            while (look() != -1 && std::isspace(look())) getc();
            if (look() == '#') {
                while (look() != -1 && look() != '\n') getc();
                continue;
            }
            break;
        }
        Token t;
        t.line = line_;
        t.col = col_;
        int c = look();
        if (c == -1) {
            t.kind = Tok::End;
            return t;
        }
        if (std::isalpha(c) || c == '_') {
            std::string id;
            while (look() != -1 && (std::isalnum(look()) || look() == '_')) id.push_back((char)getc());
            t.text = id;
            if (id == "and") t.kind = Tok::And;
            else if (id == "or") t.kind = Tok::Or;
            else if (id == "not") t.kind = Tok::Not;
            else if (id == "true") t.kind = Tok::True;
            else if (id == "false") t.kind = Tok::False;
            else if (id == "exists") t.kind = Tok::Exists;
            else if (id == "count") t.kind = Tok::Count;
            else if (id == "sum") t.kind = Tok::Sum;
            else if (id == "mean") t.kind = Tok::Mean;
            else t.kind = Tok::Ident;
            return t;
        }
        if (std::isdigit(c) || c == '-') {
            std::string num;
            num.push_back((char)getc());
            bool is_float = false;
            while (look() != -1 && (std::isdigit(look()) || look() == '.' || look() == 'e' ||
                                    look() == 'E' || look() == '+' || look() == '-')) {
                // '.' followed by an identifier char would be a path separator,
                // but paths never start with a digit, so '.' here is decimal.
                char ch = (char)look();
                if ((ch == '+' || ch == '-') &&
                    !(num.back() == 'e' || num.back() == 'E'))
                    break;
                if (ch == '.' || ch == 'e' || ch == 'E') is_float = true;
                num.push_back((char)getc());
            }
            if (is_float) {
                t.kind = Tok::Float;
                try {
                    t.fval = std::stod(num);
                } catch (const std::exception&) {
                    fail("bad number '" + num + "'");
                }
            } else {
                t.kind = Tok::Int;
                auto res = std::from_chars(num.data(), num.data() + num.size(), t.ival);
                if (res.ec != std::errc{} || res.ptr != num.data() + num.size())
                    fail("bad number '" + num + "'");
            }
            return t;
        }
        if (c == '"') {
            getc();
            std::string s;
            for (;;) {
                int ch = getc();
                if (ch == -1) fail("unterminated string");
                if (ch == '"') break;
                if (ch == '\\') {
                    int esc = getc();
                    if (esc == 'n') s.push_back('\n');
                    else if (esc == 't') s.push_back('\t');
                    else if (esc == '"') s.push_back('"');
                    else if (esc == '\\') s.push_back('\\');
                    else fail("bad escape");
                } else {
                    s.push_back((char)ch);
                }
            }
            t.kind = Tok::Str;
            t.text = s;
            return t;
        }
        getc();
        switch (c) {
            case '(': t.kind = Tok::LParen; return t;
            case ')': t.kind = Tok::RParen; return t;
            case ',': t.kind = Tok::Comma; return t;
            case '.': t.kind = Tok::Dot; return t;
            case '=':
                if (look() == '=') { getc(); t.kind = Tok::Eq; return t; }
                fail("expected '=='");
            case '!':
                if (look() == '=') { getc(); t.kind = Tok::Ne; return t; }
                fail("expected '!='");
            case '<':
                if (look() == '=') { getc(); t.kind = Tok::Le; return t; }
                t.kind = Tok::Lt;
                return t;
            case '>':
                if (look() == '=') { getc(); t.kind = Tok::Ge; return t; }
                t.kind = Tok::Gt;
                return t;
        }
        fail(std::string("unexpected character '") + (char)c + "'");
    }

    std::string_view src_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;
    Token cur_;
};

// --- parser ---

class Parser {
public:
    explicit Parser(std::string_view src) : lex_(src) {}

    ExprPtr parse_all() {
        ExprPtr e = parse_or();
        expect(Tok::End, "end of input");
        return e;
    }

private:
    [[noreturn]] void fail(const Token& t, const std::string& msg) {
        throw SyntaxError(t.line, t.col, msg);
    }

    Token expect(Tok kind, const std::string& what) {
        if (lex_.peek().kind != kind) fail(lex_.peek(), "expected " + what);
        return lex_.next();
    }

    ExprPtr parse_or() {
        ExprPtr e = parse_and();
        while (lex_.peek().kind == Tok::Or) {
            lex_.next();
            auto node = std::make_shared<Expr>();
            node->kind = Expr::Kind::Bool;
            node->bool_op = BoolOp::Or;
            node->lhs = e;
            node->rhs = parse_and();
            e = node;
        }
        return e;
    }

    ExprPtr parse_and() {
        ExprPtr e = parse_not();
        while (lex_.peek().kind == Tok::And) {
            lex_.next();
            auto node = std::make_shared<Expr>();
            node->kind = Expr::Kind::Bool;
            node->bool_op = BoolOp::And;
            node->lhs = e;
            node->rhs = parse_not();
            e = node;
        }
        return e;
    }

    ExprPtr parse_not() {
        if (lex_.peek().kind == Tok::Not) {
            lex_.next();
            auto node = std::make_shared<Expr>();
            node->kind = Expr::Kind::Not;
            node->lhs = parse_not();
            return node;
        }
        return parse_cmp();
    }

    ExprPtr parse_cmp() {
        ExprPtr e = parse_term();
        Tok k = lex_.peek().kind;
        if (k == Tok::Eq || k == Tok::Ne || k == Tok::Lt || k == Tok::Le || k == Tok::Gt ||
            k == Tok::Ge) {
            lex_.next();
            auto node = std::make_shared<Expr>();
            node->kind = Expr::Kind::Cmp;
            switch (k) {
                case Tok::Eq: node->cmp_op = CmpOp::Eq; break;
                case Tok::Ne: node->cmp_op = CmpOp::Ne; break;
                case Tok::Lt: node->cmp_op = CmpOp::Lt; break;
                case Tok::Le: node->cmp_op = CmpOp::Le; break;
                case Tok::Gt: node->cmp_op = CmpOp::Gt; break;
                default: node->cmp_op = CmpOp::Ge; break;
            }
            node->lhs = e;
            node->rhs = parse_term();
            return node;
        }
        return e;
    }

    std::vector<std::string> parse_path() {
        std::vector<std::string> path;
        path.push_back(expect(Tok::Ident, "identifier").text);
        while (lex_.peek().kind == Tok::Dot) {
            lex_.next();
            path.push_back(expect(Tok::Ident, "identifier after '.'").text);
        }
        return path;
    }

    double parse_number() {
        const Token& t = lex_.peek();
        if (t.kind == Tok::Int) return static_cast<double>(lex_.next().ival);
        if (t.kind == Tok::Float) return lex_.next().fval;
        fail(t, "expected number");
    }

    ExprPtr parse_term() {
        const Token& t = lex_.peek();
        auto node = std::make_shared<Expr>();
        switch (t.kind) {
            case Tok::Int:
                node->kind = Expr::Kind::Literal;
                node->literal = Value(lex_.next().ival);
                return node;
            case Tok::Float:
                node->kind = Expr::Kind::Literal;
                node->literal = Value(lex_.next().fval);
                return node;
            case Tok::Str:
                node->kind = Expr::Kind::Literal;
                node->literal = Value(lex_.next().text);
                return node;
            case Tok::True:
                lex_.next();
                node->kind = Expr::Kind::Literal;
                node->literal = Value(true);
                return node;
            case Tok::False:
                lex_.next();
                node->kind = Expr::Kind::Literal;
                node->literal = Value(false);
                return node;
            case Tok::Ident:
                node->kind = Expr::Kind::Path;
                node->path = parse_path();
                return node;
            case Tok::LParen: {
                lex_.next();
                ExprPtr inner = parse_or();
                expect(Tok::RParen, "')'");
                return inner;
            }
            case Tok::Exists: {
                lex_.next();
                expect(Tok::LParen, "'('");
                node->kind = Expr::Kind::Exists;
                node->path = parse_path();
                expect(Tok::Comma, "','");
                node->lhs = parse_or();
                expect(Tok::RParen, "')'");
                return node;
            }
            case Tok::Count: {
                lex_.next();
                expect(Tok::LParen, "'('");
                node->kind = Expr::Kind::Count;
                node->lhs = parse_or();
                expect(Tok::RParen, "')'");
                return node;
            }
            case Tok::Sum:
            case Tok::Mean: {
                bool is_sum = t.kind == Tok::Sum;
                lex_.next();
                expect(Tok::LParen, "'('");
                node->kind = is_sum ? Expr::Kind::Sum : Expr::Kind::Mean;
                node->path = parse_path();
                expect(Tok::Comma, "','");
                node->clip_lo = parse_number();
                expect(Tok::Comma, "','");
                node->clip_hi = parse_number();
                expect(Tok::RParen, "')'");
                if (!(node->clip_lo < node->clip_hi))
                    fail(t, "clip_lo must be less than clip_hi");
                return node;
            }
            default:
                fail(t, "expected expression");
        }
    }

    Lexer lex_;
};

std::string path_string(const std::vector<std::string>& path) {
    std::string s;
    for (size_t i = 0; i < path.size(); ++i) {
        if (i) s.push_back('.');
        s += path[i];
    }
    return s;
}

}  // namespace

ExprPtr parse(std::string_view source) {
    return Parser(source).parse_all();
}

// --- evaluation ---

namespace {

struct EvalCtx {
    const Record* record = nullptr;
    const RecordList* batch = nullptr;
};

const Value& resolve_path(const std::vector<std::string>& path, const Record& record) {
    const Record* cur = &record;
    for (size_t i = 0; i < path.size(); ++i) {
        auto it = cur->find(path[i]);
        if (it == cur->end()) throw MissingField(path_string(path));
        if (i + 1 == path.size()) return it->second;
        // Intermediate path elements must be single-record lists.
        if (!it->second.is_list() || it->second.as_list().size() != 1)
            throw TypeMismatch("path '" + path_string(path) + "' traverses a non-record field");
        cur = &it->second.as_list().front();
    }
    throw MissingField(path_string(path));
}

double clip(double x, double lo, double hi) {
    if (x < lo) return lo;
    if (x > hi) return hi;
    return x;
}

Value eval_expr(const Expr& e, const EvalCtx& ctx);

bool eval_bool(const Expr& e, const EvalCtx& ctx) {
    Value v = eval_expr(e, ctx);
    if (!v.is_bool()) throw TypeMismatch("expected bool, got " + v.type_name());
    return v.as_bool();
}

Value eval_cmp(const Expr& e, const EvalCtx& ctx) {
    Value a = eval_expr(*e.lhs, ctx);
    Value b = eval_expr(*e.rhs, ctx);
    int ord;  // -1, 0, +1
    if (a.is_numeric() && b.is_numeric()) {
        double x = a.as_number(), y = b.as_number();
        ord = x < y ? -1 : (x > y ? 1 : 0);
    } else if (a.is_string() && b.is_string()) {
        int c = a.as_string().compare(b.as_string());
        ord = c < 0 ? -1 : (c > 0 ? 1 : 0);
    } else if (a.is_bool() && b.is_bool()) {
        ord = int(a.as_bool()) - int(b.as_bool());
    } else {
        throw TypeMismatch("cannot compare " + a.type_name() + " with " + b.type_name());
    }
    switch (e.cmp_op) {
        case CmpOp::Eq: return Value(ord == 0);
        case CmpOp::Ne: return Value(ord != 0);
        case CmpOp::Lt: return Value(ord < 0);
        case CmpOp::Le: return Value(ord <= 0);
        case CmpOp::Gt: return Value(ord > 0);
        case CmpOp::Ge: return Value(ord >= 0);
    }
    throw TypeMismatch("bad comparison op");
}

const RecordList& require_batch(const EvalCtx& ctx) {
    if (!ctx.batch) throw EvalError("aggregate used outside batch context");
    return *ctx.batch;
}

double numeric_field(const Expr& e, const Record& r) {
    const Value& v = resolve_path(e.path, r);
    if (!v.is_numeric())
        throw TypeMismatch("field '" + path_string(e.path) + "' is not numeric");
    return v.as_number();
}

Value eval_expr(const Expr& e, const EvalCtx& ctx) {
    switch (e.kind) {
        case Expr::Kind::Literal:
            return e.literal;
        case Expr::Kind::Path: {
            if (!ctx.record) throw MissingField(path_string(e.path));
            return resolve_path(e.path, *ctx.record);
        }
        case Expr::Kind::Cmp:
            return eval_cmp(e, ctx);
        case Expr::Kind::Bool: {
            bool a = eval_bool(*e.lhs, ctx);
            if (e.bool_op == BoolOp::And) return Value(a && eval_bool(*e.rhs, ctx));
            return Value(a || eval_bool(*e.rhs, ctx));
        }
        case Expr::Kind::Not:
            return Value(!eval_bool(*e.lhs, ctx));
        case Expr::Kind::Exists: {
            if (!ctx.record) throw MissingField(path_string(e.path));
            const Value& field = resolve_path(e.path, *ctx.record);
            if (!field.is_list())
                throw TypeMismatch("exists over non-list field '" + path_string(e.path) + "'");
            for (const Record& item : field.as_list()) {
                EvalCtx inner{&item, ctx.batch};
                if (eval_bool(*e.lhs, inner)) return Value(true);
            }
            return Value(false);
        }
        case Expr::Kind::Count: {
            int64_t n = 0;
            for (const Record& r : require_batch(ctx)) {
                EvalCtx inner{&r, ctx.batch};
                if (eval_bool(*e.lhs, inner)) ++n;
            }
            return Value(n);
        }
        case Expr::Kind::Sum: {
            double total = 0;
            for (const Record& r : require_batch(ctx))
                total += clip(numeric_field(e, r), e.clip_lo, e.clip_hi);
            return Value(total);
        }
        case Expr::Kind::Mean: {
            const RecordList& batch = require_batch(ctx);
            if (batch.empty()) return Value(0.0);
            double total = 0;
            for (const Record& r : batch)
                total += clip(numeric_field(e, r), e.clip_lo, e.clip_hi);
            return Value(total / static_cast<double>(batch.size()));
        }
    }
    throw EvalError("corrupt AST");
}

}  // namespace

Value eval(const ExprPtr& expr, const Record& record) {
    EvalCtx ctx{&record, nullptr};
    return eval_expr(*expr, ctx);
}

Value eval_batch(const ExprPtr& expr, const RecordList& batch) {
    EvalCtx ctx{nullptr, &batch};
    return eval_expr(*expr, ctx);
}

bool is_aggregate(const ExprPtr& expr) {
    switch (expr->kind) {
        case Expr::Kind::Count:
        case Expr::Kind::Sum:
        case Expr::Kind::Mean:
            return true;
        case Expr::Kind::Cmp:
        case Expr::Kind::Bool:
            return is_aggregate(expr->lhs) || is_aggregate(expr->rhs);
        case Expr::Kind::Not:
            return is_aggregate(expr->lhs);
        default:
            return false;
    }
}

// --- printing ---

namespace {

const char* cmp_name(CmpOp op) {
    switch (op) {
        case CmpOp::Eq: return "==";
        case CmpOp::Ne: return "!=";
        case CmpOp::Lt: return "<";
        case CmpOp::Le: return "<=";
        case CmpOp::Gt: return ">";
        case CmpOp::Ge: return ">=";
    }
    return "?";
}

std::string number_repr(double d) {
    std::ostringstream os;
    os.precision(17);
    os << d;
    std::string s = os.str();
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
        s += ".0";
    return s;
}

std::string literal_repr(const Value& v) {
    if (v.is_int()) return std::to_string(v.as_int());
    if (v.is_float()) return number_repr(v.as_float());
    if (v.is_bool()) return v.as_bool() ? "true" : "false";
    if (v.is_string()) {
        std::string out = "\"";
        for (char c : v.as_string()) {
            if (c == '"' || c == '\\') out.push_back('\\');
            if (c == '\n') { out += "\\n"; continue; }
            out.push_back(c);
        }
        out.push_back('"');
        return out;
    }
    throw TypeMismatch("non-scalar literal");
}

// Precedence levels: or=1, and=2, not=3, cmp=4, term=5.
int level(const Expr& e) {
    switch (e.kind) {
        case Expr::Kind::Bool: return e.bool_op == BoolOp::Or ? 1 : 2;
        case Expr::Kind::Not: return 3;
        case Expr::Kind::Cmp: return 4;
        default: return 5;
    }
}

void print_expr(std::string& out, const Expr& e, int min_level) {
    int lv = level(e);
    bool paren = lv < min_level;
    if (paren) out.push_back('(');
    switch (e.kind) {
        case Expr::Kind::Literal:
            out += literal_repr(e.literal);
            break;
        case Expr::Kind::Path:
            out += path_string(e.path);
            break;
        case Expr::Kind::Cmp:
            print_expr(out, *e.lhs, 5);
            out += " ";
            out += cmp_name(e.cmp_op);
            out += " ";
            print_expr(out, *e.rhs, 5);
            break;
        case Expr::Kind::Bool:
            print_expr(out, *e.lhs, lv);
            out += e.bool_op == BoolOp::Or ? " or " : " and ";
            print_expr(out, *e.rhs, lv + 1);
            break;
        case Expr::Kind::Not:
            out += "not ";
            print_expr(out, *e.lhs, 3);
            break;
        case Expr::Kind::Exists:
            out += "exists(" + path_string(e.path) + ", ";
            print_expr(out, *e.lhs, 1);
            out += ")";
            break;
        case Expr::Kind::Count:
            out += "count(";
            print_expr(out, *e.lhs, 1);
            out += ")";
            break;
        case Expr::Kind::Sum:
        case Expr::Kind::Mean:
            out += e.kind == Expr::Kind::Sum ? "sum(" : "mean(";
            out += path_string(e.path) + ", " + number_repr(e.clip_lo) + ", " +
                   number_repr(e.clip_hi) + ")";
            break;
    }
    if (paren) out.push_back(')');
}

void encode_expr(Encoder& enc, const Expr& e) {
    enc.u8(static_cast<uint8_t>(e.kind));
    switch (e.kind) {
        case Expr::Kind::Literal:
            enc.bytes(encode_value(e.literal));
            break;
        case Expr::Kind::Path:
            enc.list_count(e.path.size());
            for (const auto& p : e.path) enc.str(p);
            break;
        case Expr::Kind::Cmp:
            enc.u8(static_cast<uint8_t>(e.cmp_op));
            encode_expr(enc, *e.lhs);
            encode_expr(enc, *e.rhs);
            break;
        case Expr::Kind::Bool:
            enc.u8(static_cast<uint8_t>(e.bool_op));
            encode_expr(enc, *e.lhs);
            encode_expr(enc, *e.rhs);
            break;
        case Expr::Kind::Not:
            encode_expr(enc, *e.lhs);
            break;
        case Expr::Kind::Exists:
            enc.list_count(e.path.size());
            for (const auto& p : e.path) enc.str(p);
            encode_expr(enc, *e.lhs);
            break;
        case Expr::Kind::Count:
            encode_expr(enc, *e.lhs);
            break;
        case Expr::Kind::Sum:
        case Expr::Kind::Mean:
            enc.list_count(e.path.size());
            for (const auto& p : e.path) enc.str(p);
            enc.f64(e.clip_lo);
            enc.f64(e.clip_hi);
            break;
    }
}

}  // namespace

std::string print(const ExprPtr& expr) {
    std::string out;
    print_expr(out, *expr, 0);
    return out;
}

Bytes encode_ast(const ExprPtr& expr) {
    Encoder enc;
    encode_expr(enc, *expr);
    return enc.take();
}

Digest fn_digest(const ExprPtr& expr) {
    return sha256(encode_ast(expr));
}

bool structurally_equal(const ExprPtr& a, const ExprPtr& b) {
    return encode_ast(a) == encode_ast(b);
}

}  // namespace pixiu::taskdsl
