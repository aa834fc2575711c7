#ifndef INLA_KVTREE_HPP
#define INLA_KVTREE_HPP

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "inla/errors.hpp"

namespace inla {

/// Ordered key-value tree, serialized as an indentation-based text document
/// (2 spaces per level, `key: value` leaves, `key:` interior nodes, `#`
/// comments). Insertion order is preserved so output is deterministic.
struct KvNode {
    std::string key;
    std::string value;
    std::vector<KvNode> children;

    bool is_leaf() const { return children.empty(); }

    KvNode* find(const std::string& k) {
        for (auto& c : children)
            if (c.key == k) return &c;
        return nullptr;
    }
    const KvNode* find(const std::string& k) const {
        for (const auto& c : children)
            if (c.key == k) return &c;
        return nullptr;
    }
    const KvNode& at(const std::string& k) const {
        const KvNode* n = find(k);
        if (!n) throw IoError("missing key '" + k + "' under '" + key + "'");
        return *n;
    }
    bool has(const std::string& k) const { return find(k) != nullptr; }

    KvNode& child(const std::string& k) {
        if (KvNode* n = find(k)) return *n;
        children.push_back(KvNode{k, "", {}});
        return children.back();
    }
    KvNode& add(const std::string& k, std::string v = "") {
        children.push_back(KvNode{k, std::move(v), {}});
        return children.back();
    }
    KvNode& add_double(const std::string& k, double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return add(k, buf);
    }
    KvNode& add_int(const std::string& k, long v) { return add(k, std::to_string(v)); }

    double as_double() const {
        char* end = nullptr;
        double v = std::strtod(value.c_str(), &end);
        if (end == value.c_str() || (end && *end != '\0'))
            throw IoError("key '" + key + "': '" + value + "' is not a number");
        return v;
    }
    long as_int() const { return static_cast<long>(as_double()); }
    double get_double(const std::string& k, double fallback) const {
        const KvNode* n = find(k);
        return n ? n->as_double() : fallback;
    }
    std::string get_string(const std::string& k, const std::string& fallback) const {
        const KvNode* n = find(k);
        return n ? n->value : fallback;
    }
};

inline void kv_write(std::ostream& os, const KvNode& node, int indent = 0) {
    for (const auto& c : node.children) {
        for (int i = 0; i < indent; ++i) os << ' ';
        os << c.key << ':';
        if (!c.value.empty()) os << ' ' << c.value;
        os << '\n';
        kv_write(os, c, indent + 2);
    }
}

inline std::string kv_to_string(const KvNode& root) {
    std::ostringstream os;
    kv_write(os, root);
    return os.str();
}

inline KvNode kv_parse(std::istream& is) {
    KvNode root;
    std::vector<KvNode*> stack{&root};
    std::vector<int> indents{-1};
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        size_t pos = line.find_first_not_of(' ');
        if (pos == std::string::npos) continue;
        if (line[pos] == '#') continue;
        int indent = static_cast<int>(pos);
        size_t colon = line.find(':', pos);
        if (colon == std::string::npos)
            throw IoError("line " + std::to_string(lineno) + ": expected 'key: value'");
        std::string key = line.substr(pos, colon - pos);
        std::string value = colon + 1 < line.size() ? line.substr(colon + 1) : "";
        size_t vstart = value.find_first_not_of(' ');
        value = vstart == std::string::npos ? "" : value.substr(vstart);
        size_t vend = value.find_last_not_of(" \t");
        if (vend != std::string::npos) value = value.substr(0, vend + 1);

        while (indent <= indents.back() && stack.size() > 1) {
            stack.pop_back();
            indents.pop_back();
        }
        if (indent <= indents.back() && stack.size() == 1 && indents.back() >= 0)
            throw IoError("line " + std::to_string(lineno) + ": bad indentation");
        KvNode& added = stack.back()->add(key, value);
        stack.push_back(&added);
        indents.push_back(indent);
    }
    return root;
}

inline KvNode kv_parse_string(const std::string& text) {
    std::istringstream is(text);
    return kv_parse(is);
}

}  // namespace inla

#endif
