#ifndef DCMERGE_HARNESS_TOML_HPP
#define DCMERGE_HARNESS_TOML_HPP

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace dcmerge {

/// Malformed or inconsistent experiment configuration. The CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace toml {

/*
 * Parser for the TOML subset used by experiment configs.
 *
 * Supported: comments, bare and quoted keys, dotted table headers
 * [a.b], basic strings with the usual escapes, literal strings, integers
 * (with '_' separators), floats including exponents and inf/nan, booleans,
 * arrays (which may span lines) and inline tables. Not supported: dates,
 * arrays of tables, multi-line strings and dotted keys on the left of '='.
 * Redefining a key or table is an error.
 */
class Parser {
public:
    explicit Parser(std::string_view text) : src_(text) {}

    nlohmann::json parse() {
        nlohmann::json root = nlohmann::json::object();
        nlohmann::json* table = &root;
        for (;;) {
            skip_ws_and_newlines();
            if (eof()) break;
            if (peek() == '[') {
                table = &open_table(root);
            } else {
                const std::string key = parse_key();
                skip_ws();
                expect('=');
                skip_ws();
                nlohmann::json value = parse_value();
                if (table->contains(key)) fail("duplicate key '" + key + "'");
                (*table)[key] = std::move(value);
            }
            end_of_line();
        }
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("config line " + std::to_string(line_) + ": " + what);
    }

    bool eof() const { return pos_ >= src_.size(); }
    char peek() const { return eof() ? '\0' : src_[pos_]; }
    char get() {
        if (eof()) fail("unexpected end of input");
        const char c = src_[pos_++];
        if (c == '\n') ++line_;
        return c;
    }
    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        get();
    }

    void skip_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }
    void skip_comment() {
        if (peek() == '#')
            while (!eof() && peek() != '\n') ++pos_;
    }
    void skip_ws_and_newlines() {
        for (;;) {
            skip_ws();
            skip_comment();
            if (peek() == '\n' || peek() == '\r') get();
            else break;
        }
    }
    void end_of_line() {
        skip_ws();
        skip_comment();
        if (eof()) return;
        if (peek() == '\r') get();
        if (peek() != '\n') fail("unexpected trailing characters");
        get();
    }

    static bool bare_key_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
    }

    std::string parse_key() {
        if (peek() == '"') return parse_basic_string();
        if (peek() == '\'') return parse_literal_string();
        std::string key;
        while (!eof() && bare_key_char(peek())) key += get();
        if (key.empty()) fail("expected a key");
        return key;
    }

    nlohmann::json& open_table(nlohmann::json& root) {
        expect('[');
        if (peek() == '[') fail("arrays of tables are not supported");
        nlohmann::json* t = &root;
        std::string path;
        for (;;) {
            skip_ws();
            const std::string part = parse_key();
            path += (path.empty() ? "" : ".") + part;
            skip_ws();
            if (!t->contains(part)) (*t)[part] = nlohmann::json::object();
            t = &(*t)[part];
            if (!t->is_object()) fail("'" + path + "' is not a table");
            if (peek() == '.') {
                get();
                continue;
            }
            break;
        }
        expect(']');
        if (defined_.count(path)) fail("table [" + path + "] defined twice");
        defined_.insert(path);
        return *t;
    }

    nlohmann::json parse_value() {
        const char c = peek();
        if (c == '"') return parse_basic_string();
        if (c == '\'') return parse_literal_string();
        if (c == '[') return parse_array();
        if (c == '{') return parse_inline_table();
        if (src_.substr(pos_, 4) == "true" && !bare_key_char(src_.size() > pos_ + 4 ? src_[pos_ + 4] : ' ')) {
            pos_ += 4;
            return true;
        }
        if (src_.substr(pos_, 5) == "false" && !bare_key_char(src_.size() > pos_ + 5 ? src_[pos_ + 5] : ' ')) {
            pos_ += 5;
            return false;
        }
        return parse_number();
    }

    std::string parse_basic_string() {
        expect('"');
        std::string out;
        for (;;) {
            if (eof() || peek() == '\n') fail("unterminated string");
            char c = get();
            if (c == '"') break;
            if (c != '\\') {
                out += c;
                continue;
            }
            c = get();
            switch (c) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case 'r': out += '\r'; break;
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                default: fail(std::string("unsupported escape \\") + c);
            }
        }
        return out;
    }

    std::string parse_literal_string() {
        expect('\'');
        std::string out;
        for (;;) {
            if (eof() || peek() == '\n') fail("unterminated string");
            const char c = get();
            if (c == '\'') break;
            out += c;
        }
        return out;
    }

    nlohmann::json parse_array() {
        expect('[');
        nlohmann::json arr = nlohmann::json::array();
        for (;;) {
            skip_ws_and_newlines();
            if (peek() == ']') break;
            arr.push_back(parse_value());
            skip_ws_and_newlines();
            if (peek() == ',') {
                get();
                continue;
            }
            if (peek() != ']') fail("expected ',' or ']' in array");
        }
        expect(']');
        return arr;
    }

    nlohmann::json parse_inline_table() {
        expect('{');
        nlohmann::json t = nlohmann::json::object();
        skip_ws();
        if (peek() == '}') {
            get();
            return t;
        }
        for (;;) {
            skip_ws();
            const std::string key = parse_key();
            skip_ws();
            expect('=');
            skip_ws();
            if (t.contains(key)) fail("duplicate key '" + key + "'");
            t[key] = parse_value();
            skip_ws();
            if (peek() == ',') {
                get();
                continue;
            }
            break;
        }
        expect('}');
        return t;
    }

    nlohmann::json parse_number() {
        std::string tok;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                          peek() == '.' || peek() == '_'))
            tok += get();
        if (tok.empty()) fail("expected a value");
        std::string body = tok;
        std::string sign;
        if (body[0] == '+' || body[0] == '-') {
            sign = body.substr(0, 1);
            body = body.substr(1);
        }
        if (body == "inf") return (sign == "-" ? -1.0 : 1.0) * std::numeric_limits<double>::infinity();
        if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
        std::string clean;
        for (std::size_t i = 0; i < body.size(); ++i) {
            if (body[i] == '_') {
                if (i == 0 || i + 1 == body.size() || !std::isdigit(static_cast<unsigned char>(body[i - 1])) ||
                    !std::isdigit(static_cast<unsigned char>(body[i + 1])))
                    fail("misplaced '_' in number '" + tok + "'");
                continue;
            }
            clean += body[i];
        }
        if (clean.empty() || !std::isdigit(static_cast<unsigned char>(clean[0]))) fail("invalid value '" + tok + "'");
        const bool is_float = clean.find_first_of(".eE") != std::string::npos;
        const std::string text = sign + clean;
        char* end = nullptr;
        if (is_float) {
            const double v = std::strtod(text.c_str(), &end);
            if (end != text.c_str() + text.size()) fail("invalid number '" + tok + "'");
            return v;
        }
        if (clean.size() > 1 && clean[0] == '0') fail("leading zeros in '" + tok + "'");
        errno = 0;
        const long long v = std::strtoll(text.c_str(), &end, 10);
        if (end != text.c_str() + text.size() || errno == ERANGE) fail("invalid integer '" + tok + "'");
        return v;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    std::set<std::string> defined_;
};

}  // namespace toml

inline nlohmann::json parse_toml(std::string_view text) { return toml::Parser(text).parse(); }

inline nlohmann::json parse_toml_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_toml(ss.str());
}

}  // namespace dcmerge

#endif  // DCMERGE_HARNESS_TOML_HPP
