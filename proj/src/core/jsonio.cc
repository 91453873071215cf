#include "core/jsonio.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "core/errors.h"

namespace efc {

void JsonWriter::separator() {
    if (pending_key_) {
        pending_key_ = false;
        return;
    }
    if (!has_elem_.empty()) {
        if (has_elem_.back()) out_ += ',';
        has_elem_.back() = true;
    }
}

void JsonWriter::begin_object() {
    separator();
    out_ += '{';
    has_elem_.push_back(false);
}

void JsonWriter::end_object() {
    out_ += '}';
    has_elem_.pop_back();
}

void JsonWriter::begin_array() {
    separator();
    out_ += '[';
    has_elem_.push_back(false);
}

void JsonWriter::end_array() {
    out_ += ']';
    has_elem_.pop_back();
}

void JsonWriter::key(const std::string& k) {
    separator();
    out_ += '"';
    for (char c : k) {
        if (c == '"' || c == '\\') out_ += '\\';
        out_ += c;
    }
    out_ += "\":";
    pending_key_ = true;
}

std::string format_double(double v) {
    if (!std::isfinite(v)) fail_numeric("attempted to serialize a non-finite value");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void JsonWriter::value(double v) {
    separator();
    out_ += format_double(v);
}

void JsonWriter::value(int v) {
    separator();
    out_ += std::to_string(v);
}

void JsonWriter::value(std::int64_t v) {
    separator();
    out_ += std::to_string(v);
}

void JsonWriter::value(bool v) {
    separator();
    out_ += v ? "true" : "false";
}

void JsonWriter::value(const std::string& v) {
    separator();
    out_ += '"';
    for (char c : v) {
        switch (c) {
            case '"': out_ += "\\\""; break;
            case '\\': out_ += "\\\\"; break;
            case '\n': out_ += "\\n"; break;
            case '\t': out_ += "\\t"; break;
            case '\r': out_ += "\\r"; break;
            default: out_ += c;
        }
    }
    out_ += '"';
}

void JsonWriter::value(const char* v) { value(std::string(v)); }

void JsonWriter::value(const Vec& v) {
    begin_array();
    for (int i = 0; i < v.size(); ++i) value(v[i]);
    end_array();
}

void JsonWriter::value(const Mat& a) {
    begin_object();
    kv("rows", static_cast<int>(a.rows()));
    kv("cols", static_cast<int>(a.cols()));
    key("data");
    begin_array();
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) value(a(i, j));
    end_array();
    end_object();
}

void save_atomic(const std::string& path, const std::string& content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) fail_io("cannot open for writing: " + tmp);
        f << content;
        if (!f.flush()) fail_io("write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail_io("rename failed: " + tmp + " -> " + path + " (" + ec.message() + ")");
}

nlohmann::json load_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail_io("cannot open: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        fail_io("malformed JSON in " + path + ": " + e.what());
    }
    return j;
}

Vec to_vec(const nlohmann::json& j) {
    if (!j.is_array()) fail_io("expected a JSON array of numbers");
    Vec v(static_cast<int>(j.size()));
    for (int i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

Mat to_mat(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
        fail_io("expected a matrix object with rows, cols, data");
    int rows = j["rows"].get<int>();
    int cols = j["cols"].get<int>();
    const auto& data = j["data"];
    if (static_cast<int>(data.size()) != rows * cols)
        fail_io("matrix data length does not match rows*cols");
    Mat a(rows, cols);
    int k = 0;
    for (int i = 0; i < rows; ++i)
        for (int jj = 0; jj < cols; ++jj) a(i, jj) = data[k++].get<double>();
    return a;
}

const nlohmann::json& require(const nlohmann::json& j, const std::string& key,
                              const std::string& context) {
    if (!j.contains(key)) fail_io("missing key \"" + key + "\" in " + context);
    return j.at(key);
}

}  // namespace efc
