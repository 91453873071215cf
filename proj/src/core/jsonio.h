#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "core/types.h"

namespace efc {

// Streaming JSON writer with deterministic output: keys appear in insertion
// order and doubles are printed with %.17g so a round trip is lossless and a
// repeated run produces byte-identical files. Non-finite doubles are rejected
// because artifacts holding NaN would silently poison downstream stages.
class JsonWriter {
  public:
    void begin_object();
    void end_object();
    void begin_array();
    void end_array();

    void key(const std::string& k);

    void value(double v);
    void value(int v);
    void value(std::int64_t v);
    void value(bool v);
    void value(const std::string& v);
    void value(const char* v);

    void kv(const std::string& k, double v) { key(k); value(v); }
    void kv(const std::string& k, int v) { key(k); value(v); }
    void kv(const std::string& k, std::int64_t v) { key(k); value(v); }
    void kv(const std::string& k, bool v) { key(k); value(v); }
    void kv(const std::string& k, const std::string& v) { key(k); value(v); }
    void kv(const std::string& k, const char* v) { key(k); value(v); }

    void value(const Vec& v);
    // Matrices serialize as {"rows": r, "cols": c, "data": [row-major flat]}.
    void value(const Mat& a);
    void kv(const std::string& k, const Vec& v) { key(k); value(v); }
    void kv(const std::string& k, const Mat& a) { key(k); value(a); }

    const std::string& str() const { return out_; }

  private:
    void separator();

    std::string out_;
    // One flag per open container: true once it holds at least one element.
    std::vector<bool> has_elem_;
    bool pending_key_ = false;
};

// Formats one double exactly as JsonWriter does (%.17g, finite-checked).
std::string format_double(double v);

// Writes content to path via a temp file and rename so readers never observe
// a half-written artifact.
void save_atomic(const std::string& path, const std::string& content);

nlohmann::json load_json(const std::string& path);

Vec to_vec(const nlohmann::json& j);
Mat to_mat(const nlohmann::json& j);

// Looks up key or raises an io error naming both key and context.
const nlohmann::json& require(const nlohmann::json& j, const std::string& key,
                              const std::string& context);

}  // namespace efc
