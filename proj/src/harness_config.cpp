#include "rlm/harness/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace rlm::harness {

namespace {

std::string strip(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

nlohmann::json parse_value(const std::string& raw, int line_no);

nlohmann::json parse_array(const std::string& raw, int line_no) {
    nlohmann::json arr = nlohmann::json::array();
    std::string body = strip(raw.substr(1, raw.size() - 2));
    if (body.empty()) return arr;
    std::size_t start = 0;
    bool in_string = false;
    for (std::size_t i = 0; i <= body.size(); ++i) {
        if (i < body.size() && body[i] == '"') in_string = !in_string;
        if (i == body.size() || (body[i] == ',' && !in_string)) {
            arr.push_back(parse_value(strip(body.substr(start, i - start)), line_no));
            start = i + 1;
        }
    }
    return arr;
}

nlohmann::json parse_value(const std::string& raw, int line_no) {
    if (raw.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty value");
    if (raw.front() == '"') {
        if (raw.size() < 2 || raw.back() != '"')
            throw ConfigError("line " + std::to_string(line_no) + ": unterminated string");
        return raw.substr(1, raw.size() - 2);
    }
    if (raw.front() == '[') {
        if (raw.back() != ']')
            throw ConfigError("line " + std::to_string(line_no) + ": unterminated array");
        return parse_array(raw, line_no);
    }
    if (raw == "true") return true;
    if (raw == "false") return false;
    try {
        std::size_t used = 0;
        if (raw.find_first_of(".eE") == std::string::npos) {
            const long long v = std::stoll(raw, &used);
            if (used == raw.size()) return v;
        } else {
            const double v = std::stod(raw, &used);
            if (used == raw.size()) return v;
        }
    } catch (const std::exception&) {
        // fall through to the error below
    }
    throw ConfigError("line " + std::to_string(line_no) + ": cannot parse value '" + raw + "'");
}

nlohmann::json* descend(nlohmann::json& root, const std::string& dotted, int line_no) {
    nlohmann::json* node = &root;
    std::size_t start = 0;
    while (start <= dotted.size()) {
        const std::size_t dot = dotted.find('.', start);
        const std::string key = dotted.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key segment");
        if (node->is_array()) node = &node->back();
        node = &(*node)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    return node;
}

}  // namespace

nlohmann::json parse_keyvalue(const std::string& text) {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* current = &root;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t comment = line.find('#');
        if (comment != std::string::npos) line.resize(comment);
        line = strip(line);
        if (line.empty()) continue;

        if (line.size() >= 4 && line.rfind("[[", 0) == 0 && line.substr(line.size() - 2) == "]]") {
            const std::string name = strip(line.substr(2, line.size() - 4));
            nlohmann::json* arr = descend(root, name, line_no);
            if (arr->is_null()) *arr = nlohmann::json::array();
            if (!arr->is_array())
                throw ConfigError("line " + std::to_string(line_no) + ": not an array: " + name);
            arr->push_back(nlohmann::json::object());
            current = &arr->back();
            continue;
        }
        if (line.front() == '[' && line.back() == ']') {
            const std::string name = strip(line.substr(1, line.size() - 2));
            nlohmann::json* section = descend(root, name, line_no);
            if (section->is_null()) *section = nlohmann::json::object();
            if (!section->is_object())
                throw ConfigError("line " + std::to_string(line_no) + ": not a table: " + name);
            current = section;
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = strip(line.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        (*descend(*current, key, line_no)) = parse_value(strip(line.substr(eq + 1)), line_no);
    }
    return root;
}

nlohmann::json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    const std::size_t first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && (text[first] == '{' || text[first] == '[')) {
        // `[` also begins a key-value section header; JSON arrays are not
        // valid top-level configs here, so treat `{` as the JSON marker and
        // fall back to key-value for `[`.
        if (text[first] == '{') {
            try {
                return nlohmann::json::parse(text);
            } catch (const nlohmann::json::parse_error& err) {
                throw ConfigError(std::string("JSON parse error: ") + err.what());
            }
        }
    }
    return parse_keyvalue(text);
}

}  // namespace rlm::harness
