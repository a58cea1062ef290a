#pragma once

// Minimal XML document model shared by the CMME reader and the MEI writers.
//
// The parser covers the subset needed for data-oriented XML: elements,
// attributes, character data, CDATA, comments, processing instructions and
// a DOCTYPE prologue (the latter three are skipped). No DTD processing, no
// external entities. Input must be UTF-8; an explicit declaration of any
// other encoding is rejected. Namespace prefixes are stripped from element
// names so documents with or without a default xmlns parse identically.
//
// Serialization is deterministic: attributes in insertion order, 3-space
// indentation, elements whose children are all text printed on one line.

#include <mensura/errors.hpp>

#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mensura {

struct XmlNode {
    using Child = std::variant<XmlNode, std::string>;

    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::vector<Child> children;

    XmlNode() = default;
    explicit XmlNode(std::string n) : name(std::move(n)) {}

    bool operator==(const XmlNode&) const = default;

    XmlNode& set(const std::string& attr, const std::string& value) {
        for (auto& [k, v] : attributes) {
            if (k == attr) { v = value; return *this; }
        }
        attributes.emplace_back(attr, value);
        return *this;
    }

    const std::string* attr(std::string_view name_) const {
        for (const auto& [k, v] : attributes) {
            if (k == name_) return &v;
        }
        return nullptr;
    }

    XmlNode& add_child(XmlNode n) {
        children.emplace_back(std::move(n));
        return std::get<XmlNode>(children.back());
    }

    void add_text(std::string t) { children.emplace_back(std::move(t)); }

    // First child element with the given name, if any.
    const XmlNode* child(std::string_view name_) const {
        for (const auto& c : children) {
            if (const auto* e = std::get_if<XmlNode>(&c); e && e->name == name_) return e;
        }
        return nullptr;
    }

    std::vector<const XmlNode*> children_named(std::string_view name_) const {
        std::vector<const XmlNode*> out;
        for (const auto& c : children) {
            if (const auto* e = std::get_if<XmlNode>(&c); e && e->name == name_) out.push_back(e);
        }
        return out;
    }

    std::vector<const XmlNode*> child_elements() const {
        std::vector<const XmlNode*> out;
        for (const auto& c : children) {
            if (const auto* e = std::get_if<XmlNode>(&c)) out.push_back(e);
        }
        return out;
    }

    // Concatenated direct text content.
    std::string text() const {
        std::string out;
        for (const auto& c : children) {
            if (const auto* t = std::get_if<std::string>(&c)) out += *t;
        }
        return out;
    }

    // Text of a named child element, empty when absent.
    std::string child_text(std::string_view name_) const {
        const XmlNode* c = child(name_);
        return c ? c->text() : std::string();
    }

    bool has_child(std::string_view name_) const { return child(name_) != nullptr; }
};

namespace detail {

class XmlParser {
public:
    explicit XmlParser(std::string_view input) : in_(input) {}

    XmlNode parse() {
        skip_bom();
        skip_misc(true);
        if (eof()) fail("document has no root element");
        XmlNode root = parse_element();
        skip_misc(false);
        if (!eof()) fail("content after root element");
        return root;
    }

private:
    std::string_view in_;
    size_t pos_ = 0;
    size_t line_ = 1;

    [[noreturn]] void fail(const std::string& msg) const {
        throw MensuraError(ErrorCode::MalformedXml,
                           msg + " (line " + std::to_string(line_) + ")");
    }

    bool eof() const { return pos_ >= in_.size(); }
    char peek() const { return pos_ < in_.size() ? in_[pos_] : '\0'; }

    char take() {
        if (eof()) fail("unexpected end of input");
        char c = in_[pos_++];
        if (c == '\n') ++line_;
        return c;
    }

    bool starts_with(std::string_view s) const { return in_.substr(pos_, s.size()) == s; }

    void expect(std::string_view s) {
        if (!starts_with(s)) fail("expected '" + std::string(s) + "'");
        for (size_t i = 0; i < s.size(); ++i) take();
    }

    void skip_ws() {
        while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) take();
    }

    void skip_bom() {
        if (in_.substr(0, 3) == "\xEF\xBB\xBF") pos_ = 3;
        if (in_.substr(0, 2) == "\xFE\xFF" || in_.substr(0, 2) == "\xFF\xFE")
            fail("UTF-16 input; only UTF-8 is accepted");
    }

    void skip_until(std::string_view end) {
        while (!eof() && !starts_with(end)) take();
        if (eof()) fail("unterminated '" + std::string(end) + "' construct");
        expect(end);
    }

    // Prologue / inter-element misc: whitespace, comments, PIs, doctype.
    void skip_misc(bool allow_decl) {
        for (;;) {
            skip_ws();
            if (starts_with("<?xml") && allow_decl) {
                parse_decl();
            } else if (starts_with("<?")) {
                skip_until("?>");
            } else if (starts_with("<!--")) {
                skip_until("-->");
            } else if (starts_with("<!DOCTYPE")) {
                skip_doctype();
            } else {
                return;
            }
        }
    }

    void parse_decl() {
        expect("<?xml");
        size_t end = in_.find("?>", pos_);
        if (end == std::string_view::npos) fail("unterminated XML declaration");
        std::string_view decl = in_.substr(pos_, end - pos_);
        size_t enc = decl.find("encoding");
        if (enc != std::string_view::npos) {
            size_t q = decl.find_first_of("\"'", enc);
            if (q != std::string_view::npos) {
                char quote = decl[q];
                size_t q2 = decl.find(quote, q + 1);
                if (q2 != std::string_view::npos) {
                    std::string val(decl.substr(q + 1, q2 - q - 1));
                    for (auto& c : val) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
                    if (val != "utf-8" && val != "utf8")
                        fail("unsupported encoding '" + val + "', only UTF-8 is accepted");
                }
            }
        }
        while (pos_ < end) take();
        expect("?>");
    }

    void skip_doctype() {
        expect("<!DOCTYPE");
        int depth = 0;
        for (;;) {
            char c = take();
            if (c == '[') ++depth;
            else if (c == ']') --depth;
            else if (c == '>' && depth <= 0) return;
        }
    }

    static bool name_start(char c) {
        return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == ':';
    }
    static bool name_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == ':' ||
               c == '-' || c == '.';
    }

    std::string parse_name() {
        if (eof() || !name_start(peek())) fail("expected a name");
        std::string n;
        while (!eof() && name_char(peek())) n += take();
        // Strip any namespace prefix; CMME uses a default namespace.
        if (size_t colon = n.rfind(':'); colon != std::string::npos && n.compare(0, 5, "xmlns") != 0)
            n = n.substr(colon + 1);
        return n;
    }

    std::string decode_entities(std::string_view raw) {
        std::string out;
        out.reserve(raw.size());
        for (size_t i = 0; i < raw.size();) {
            if (raw[i] != '&') { out += raw[i++]; continue; }
            size_t semi = raw.find(';', i);
            if (semi == std::string_view::npos) fail("unterminated entity reference");
            std::string_view ent = raw.substr(i + 1, semi - i - 1);
            if (ent == "amp") out += '&';
            else if (ent == "lt") out += '<';
            else if (ent == "gt") out += '>';
            else if (ent == "quot") out += '"';
            else if (ent == "apos") out += '\'';
            else if (!ent.empty() && ent[0] == '#') {
                long code = 0;
                try {
                    code = (ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X'))
                               ? std::stol(std::string(ent.substr(2)), nullptr, 16)
                               : std::stol(std::string(ent.substr(1)));
                } catch (...) { fail("bad character reference"); }
                append_utf8(out, code);
            } else {
                fail("unknown entity '&" + std::string(ent) + ";'");
            }
            i = semi + 1;
        }
        return out;
    }

    void append_utf8(std::string& out, long cp) {
        if (cp < 0 || cp > 0x10FFFF) fail("character reference out of range");
        auto c = static_cast<uint32_t>(cp);
        if (c < 0x80) {
            out += static_cast<char>(c);
        } else if (c < 0x800) {
            out += static_cast<char>(0xC0 | (c >> 6));
            out += static_cast<char>(0x80 | (c & 0x3F));
        } else if (c < 0x10000) {
            out += static_cast<char>(0xE0 | (c >> 12));
            out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (c & 0x3F));
        } else {
            out += static_cast<char>(0xF0 | (c >> 18));
            out += static_cast<char>(0x80 | ((c >> 12) & 0x3F));
            out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (c & 0x3F));
        }
    }

    std::string parse_attr_value() {
        char quote = take();
        if (quote != '"' && quote != '\'') fail("attribute value must be quoted");
        size_t start = pos_;
        while (!eof() && peek() != quote) {
            if (peek() == '<') fail("'<' in attribute value");
            take();
        }
        if (eof()) fail("unterminated attribute value");
        std::string_view raw = in_.substr(start, pos_ - start);
        take();  // closing quote
        return decode_entities(raw);
    }

    XmlNode parse_element() {
        expect("<");
        XmlNode node;
        node.name = parse_name();
        for (;;) {
            skip_ws();
            if (eof()) fail("unterminated start tag for <" + node.name + ">");
            if (peek() == '/') {
                expect("/>");
                return node;
            }
            if (peek() == '>') {
                take();
                parse_content(node);
                return node;
            }
            std::string an = parse_name();
            skip_ws();
            expect("=");
            skip_ws();
            std::string av = parse_attr_value();
            for (const auto& [k, v] : node.attributes)
                if (k == an) fail("duplicate attribute '" + an + "'");
            node.attributes.emplace_back(std::move(an), std::move(av));
        }
    }

    void parse_content(XmlNode& node) {
        std::string text;
        auto flush_text = [&] {
            std::string t = trim(text);
            if (!t.empty()) node.add_text(std::move(t));
            text.clear();
        };
        for (;;) {
            if (eof()) fail("unterminated element <" + node.name + ">");
            if (starts_with("</")) {
                flush_text();
                expect("</");
                std::string close = parse_name();
                if (close != node.name)
                    fail("mismatched close tag </" + close + "> for <" + node.name + ">");
                skip_ws();
                expect(">");
                return;
            }
            if (starts_with("<!--")) {
                skip_until("-->");
            } else if (starts_with("<![CDATA[")) {
                expect("<![CDATA[");
                size_t end = in_.find("]]>", pos_);
                if (end == std::string_view::npos) fail("unterminated CDATA section");
                text.append(in_.substr(pos_, end - pos_));
                while (pos_ < end) take();
                expect("]]>");
            } else if (starts_with("<?")) {
                skip_until("?>");
            } else if (peek() == '<') {
                flush_text();
                node.children.emplace_back(parse_element());
            } else {
                size_t start = pos_;
                while (!eof() && peek() != '<') take();
                text += decode_entities(in_.substr(start, pos_ - start));
            }
        }
    }

    static std::string trim(std::string_view s) {
        size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return std::string(s.substr(b, e - b));
    }
};

inline void xml_escape_into(std::string& out, std::string_view s, bool attr) {
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': if (attr) { out += "&quot;"; break; } else { out += c; break; }
            default: out += c;
        }
    }
}

inline bool text_only(const XmlNode& n) {
    for (const auto& c : n.children)
        if (std::holds_alternative<XmlNode>(c)) return false;
    return true;
}

inline void serialize_node(std::string& out, const XmlNode& n, int depth) {
    std::string indent(static_cast<size_t>(depth) * 3, ' ');
    out += indent;
    out += '<';
    out += n.name;
    for (const auto& [k, v] : n.attributes) {
        out += ' ';
        out += k;
        out += "=\"";
        xml_escape_into(out, v, true);
        out += '"';
    }
    if (n.children.empty()) {
        out += "/>\n";
        return;
    }
    if (text_only(n)) {
        out += '>';
        for (const auto& c : n.children) xml_escape_into(out, std::get<std::string>(c), false);
        out += "</";
        out += n.name;
        out += ">\n";
        return;
    }
    out += ">\n";
    for (const auto& c : n.children) {
        if (const auto* e = std::get_if<XmlNode>(&c)) {
            serialize_node(out, *e, depth + 1);
        } else {
            out += std::string(static_cast<size_t>(depth + 1) * 3, ' ');
            xml_escape_into(out, std::get<std::string>(c), false);
            out += '\n';
        }
    }
    out += indent;
    out += "</";
    out += n.name;
    out += ">\n";
}

}  // namespace detail

// Throws MensuraError(MalformedXml) on anything not well formed.
inline XmlNode parse_xml(std::string_view bytes) {
    detail::XmlParser p(bytes);
    return p.parse();
}

inline std::string serialize_xml(const XmlNode& root) {
    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    detail::serialize_node(out, root, 0);
    return out;
}

}  // namespace mensura
