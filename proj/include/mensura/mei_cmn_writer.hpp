#pragma once

// MeasuredScore -> MEI CMN, optionally restricted to the MEI-Basic subset.
// The whitelist ships as data/mei_basic_whitelist.tsv and is baked in at
// build time; under mei_basic the writer prunes anything outside it (with a
// report entry per drop) and validate_basic_subset checks compliance.

#include <mensura/cmn_transform.hpp>
#include <mensura/errors.hpp>
#include <mensura/mei_basic_whitelist_data.hpp>
#include <mensura/report.hpp>
#include <mensura/xml.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mensura {

struct CmnWriteOptions {
    bool mei_basic = false;
    std::string id_prefix = "m";
};

struct Violation {
    std::string path;
    std::string message;
    bool operator==(const Violation&) const = default;
};

namespace detail {

struct BasicWhitelist {
    std::map<std::string, std::set<std::string>, std::less<>> elements;
    std::set<std::string, std::less<>> global_attrs;

    static const BasicWhitelist& get() {
        static const BasicWhitelist wl = parse(kMeiBasicWhitelistTsv);
        return wl;
    }

    bool element_ok(std::string_view name) const { return elements.count(name) > 0; }

    bool attr_ok(std::string_view element, std::string_view attr) const {
        if (global_attrs.count(attr)) return true;
        auto it = elements.find(element);
        return it != elements.end() && it->second.count(attr) > 0;
    }

private:
    static BasicWhitelist parse(std::string_view tsv) {
        BasicWhitelist wl;
        size_t pos = 0;
        while (pos < tsv.size()) {
            size_t eol = tsv.find('\n', pos);
            if (eol == std::string_view::npos) eol = tsv.size();
            std::string_view line = tsv.substr(pos, eol - pos);
            pos = eol + 1;
            if (line.empty() || line.front() == '#') continue;
            size_t tab = line.find('\t');
            std::string name(line.substr(0, tab == std::string_view::npos ? line.size() : tab));
            while (!name.empty() && (name.back() == '\r' || name.back() == ' ')) name.pop_back();
            if (name.empty()) continue;
            std::set<std::string> attrs;
            if (tab != std::string_view::npos) {
                std::string_view rest = line.substr(tab + 1);
                size_t p = 0;
                while (p <= rest.size()) {
                    size_t comma = rest.find(',', p);
                    if (comma == std::string_view::npos) comma = rest.size();
                    std::string a(rest.substr(p, comma - p));
                    while (!a.empty() && (a.back() == '\r' || a.back() == ' ')) a.pop_back();
                    if (!a.empty()) attrs.insert(a);
                    p = comma + 1;
                }
            }
            if (name == "*") wl.global_attrs = std::move(attrs);
            else wl.elements[name] = std::move(attrs);
        }
        return wl;
    }
};

// Removes everything outside the whitelist, reporting each drop.
inline void prune_to_basic(XmlNode& node, ConversionReport& report) {
    const BasicWhitelist& wl = BasicWhitelist::get();
    std::erase_if(node.attributes, [&](const auto& kv) {
        if (wl.attr_ok(node.name, kv.first)) return false;
        report.drop("attribute @" + kv.first + " on <" + node.name + "> outside MEI-Basic");
        return true;
    });
    std::erase_if(node.children, [&](XmlNode::Child& c) {
        XmlNode* e = std::get_if<XmlNode>(&c);
        if (!e) return false;
        if (wl.element_ok(e->name)) return false;
        report.drop("element <" + e->name + "> outside MEI-Basic");
        return true;
    });
    for (auto& c : node.children)
        if (XmlNode* e = std::get_if<XmlNode>(&c)) prune_to_basic(*e, report);
}

inline void clef_attributes(XmlNode& staffDef, ClefChoice c) {
    switch (c) {
        case ClefChoice::G2:
            staffDef.set("clef.shape", "G");
            staffDef.set("clef.line", "2");
            break;
        case ClefChoice::G2OttavaBassa:
            staffDef.set("clef.shape", "G");
            staffDef.set("clef.line", "2");
            staffDef.set("clef.dis", "8");
            staffDef.set("clef.dis.place", "below");
            break;
        case ClefChoice::F4:
            staffDef.set("clef.shape", "F");
            staffDef.set("clef.line", "4");
            break;
    }
}

}  // namespace detail

// Every element/attribute outside the compiled MEI-Basic whitelist, with its
// path; an empty result means the document is compliant.
inline std::vector<Violation> validate_basic_subset(const XmlNode& doc) {
    std::vector<Violation> out;
    const detail::BasicWhitelist& wl = detail::BasicWhitelist::get();

    struct Walker {
        std::vector<Violation>* out;
        const detail::BasicWhitelist* wl;
        void walk(const XmlNode& n, const std::string& path) {
            std::string here = path + "/" + n.name;
            if (!wl->element_ok(n.name)) {
                out->push_back(Violation{here, "element <" + n.name + "> not in MEI-Basic"});
                return;  // children of a foreign element are not re-reported
            }
            for (const auto& [k, _] : n.attributes)
                if (!wl->attr_ok(n.name, k))
                    out->push_back(Violation{here, "attribute @" + k + " not allowed on <" +
                                                       n.name + ">"});
            for (const auto& c : n.children)
                if (const XmlNode* e = std::get_if<XmlNode>(&c)) walk(*e, here);
        }
    } walker{&out, &wl};
    walker.walk(doc, "");
    return out;
}

// Serializes a MeasuredScore as MEI CMN. Deterministic ids:
// <prefix>-v<voice>-n<serial> for notes, <prefix>-m<k> for measures.
inline XmlNode write_cmn(const MeasuredScore& ms, const CmnWriteOptions& opt,
                         ConversionReport& report) {
    XmlNode mei("mei");
    mei.set("xmlns", "http://www.music-encoding.org/ns/mei");
    mei.set("meiversion", "5.0");

    XmlNode& head = mei.add_child(XmlNode("meiHead"));
    XmlNode& fileDesc = head.add_child(XmlNode("fileDesc"));
    XmlNode& titleStmt = fileDesc.add_child(XmlNode("titleStmt"));
    XmlNode& title = titleStmt.add_child(XmlNode("title"));
    if (!ms.title.empty()) title.add_text(ms.title);
    if (!ms.composer.empty() || !ms.editor.empty()) {
        XmlNode& resp = titleStmt.add_child(XmlNode("respStmt"));
        if (!ms.composer.empty()) {
            XmlNode& p = resp.add_child(XmlNode("persName"));
            p.set("role", "composer");
            p.add_text(ms.composer);
        }
        if (!ms.editor.empty()) {
            XmlNode& p = resp.add_child(XmlNode("persName"));
            p.set("role", "editor");
            p.add_text(ms.editor);
        }
    }
    fileDesc.add_child(XmlNode("pubStmt"));

    XmlNode& music = mei.add_child(XmlNode("music"));
    XmlNode& body = music.add_child(XmlNode("body"));
    XmlNode& mdiv = body.add_child(XmlNode("mdiv"));
    XmlNode& score = mdiv.add_child(XmlNode("score"));

    const MeterSig& initial = ms.meter_map.entries.empty() ? MeterSig{}
                                                           : ms.meter_map.entries[0].second;
    XmlNode& scoreDef = score.add_child(XmlNode("scoreDef"));
    scoreDef.set("meter.count", std::to_string(initial.count));
    scoreDef.set("meter.unit", std::to_string(initial.unit));
    XmlNode& staffGrp = scoreDef.add_child(XmlNode("staffGrp"));
    for (size_t v = 0; v < ms.voices.size(); ++v) {
        XmlNode& staffDef = staffGrp.add_child(XmlNode("staffDef"));
        staffDef.set("n", std::to_string(v + 1));
        staffDef.set("lines", "5");
        detail::clef_attributes(staffDef, ms.voices[v].clef);
        if (!ms.voices[v].keysig.empty()) staffDef.set("keysig", ms.voices[v].keysig);
        if (!ms.voices[v].meta.name.empty()) staffDef.set("label", ms.voices[v].meta.name);
    }

    XmlNode& section = score.add_child(XmlNode("section"));

    auto note_id = [&](size_t voice, int serial) {
        return opt.id_prefix + "-v" + std::to_string(voice + 1) + "-n" + std::to_string(serial);
    };

    size_t n_measures = ms.voices.empty() ? 0 : ms.voices[0].measures.size();
    for (size_t mi = 0; mi < n_measures; ++mi) {
        const Rational& m_start = ms.voices[0].measures[mi].start;
        // meter change before this measure
        for (size_t e = 1; e < ms.meter_map.entries.size(); ++e) {
            if (ms.meter_map.entries[e].first == m_start) {
                XmlNode& change = section.add_child(XmlNode("scoreDef"));
                change.set("meter.count", std::to_string(ms.meter_map.entries[e].second.count));
                change.set("meter.unit", std::to_string(ms.meter_map.entries[e].second.unit));
            }
        }

        XmlNode& measure = section.add_child(XmlNode("measure"));
        measure.set("xml:id", opt.id_prefix + "-m" + std::to_string(mi + 1));
        measure.set("n", std::to_string(mi + 1));
        if (mi + 1 == n_measures) measure.set("right", "end");

        struct Control {
            int order;  // 0 = dir, 1 = tie, 2 = fermata, 3 = bracketSpan
            size_t voice;
            int serial;
            XmlNode node;
        };
        std::vector<Control> controls;

        for (size_t v = 0; v < ms.voices.size(); ++v) {
            const Measure& m = ms.voices[v].measures[mi];
            XmlNode& staff = measure.add_child(XmlNode("staff"));
            staff.set("n", std::to_string(v + 1));
            XmlNode& layer = staff.add_child(XmlNode("layer"));
            layer.set("n", "1");

            std::optional<XmlNode> tuplet_node;
            int open_tuplet = 0;
            auto target = [&]() -> XmlNode& { return tuplet_node ? *tuplet_node : layer; };
            auto close_tuplet = [&] {
                if (tuplet_node) {
                    layer.children.emplace_back(std::move(*tuplet_node));
                    tuplet_node.reset();
                    open_tuplet = 0;
                }
            };

            for (const CmnNote& n : m.notes) {
                if (n.tuplet != open_tuplet) {
                    close_tuplet();
                    if (n.tuplet > 0) {
                        const TupletSpec* spec = nullptr;
                        for (const auto& t : m.tuplets)
                            if (t.id == n.tuplet) spec = &t;
                        tuplet_node.emplace("tuplet");
                        tuplet_node->set("xml:id", opt.id_prefix + "-v" + std::to_string(v + 1) +
                                                       "-t" + std::to_string(n.tuplet));
                        if (spec) {
                            tuplet_node->set("num", std::to_string(spec->num));
                            tuplet_node->set("numbase", std::to_string(spec->numbase));
                        }
                        open_tuplet = n.tuplet;
                    }
                }
                XmlNode el(n.space ? "space" : (n.rest ? "rest" : "note"));
                el.set("xml:id", note_id(v, n.serial));
                el.set("dur", cmn_dur_mei(n.dur));
                if (n.dots > 0) el.set("dots", std::to_string(n.dots));
                if (!n.rest) {
                    el.set("pname", detail::pname(n.pitch));
                    el.set("oct", std::to_string(n.pitch.octave));
                    if (n.pitch.accidental)
                        el.set("accid", detail::accid_code(*n.pitch.accidental));
                    if (!n.syllable.empty()) {
                        XmlNode verse("verse");
                        verse.set("n", "1");
                        XmlNode syl("syl");
                        syl.add_text(n.syllable);
                        verse.children.emplace_back(std::move(syl));
                        el.children.emplace_back(std::move(verse));
                    }
                }
                target().children.emplace_back(std::move(el));

                if (!n.rest && (n.tie == TieFlag::Start || n.tie == TieFlag::Mid)) {
                    XmlNode tie("tie");
                    tie.set("startid", "#" + note_id(v, n.serial));
                    tie.set("endid", "#" + note_id(v, n.serial + 1));
                    controls.push_back({1, v, n.serial, std::move(tie)});
                }
                if (n.fermata) {
                    XmlNode f("fermata");
                    f.set("startid", "#" + note_id(v, n.serial));
                    controls.push_back({2, v, n.serial, std::move(f)});
                }
                if (n.signum) {
                    XmlNode f("fermata");
                    f.set("startid", "#" + note_id(v, n.serial));
                    f.set("type", "signum_congruentiae");
                    controls.push_back({2, v, n.serial, std::move(f)});
                }
            }
            close_tuplet();

            // directives anchored to notes that start in this measure
            for (const auto& d : ms.directives) {
                if (d.voice != static_cast<int>(v)) continue;
                for (const CmnNote& n : m.notes) {
                    if (n.serial == d.anchor_serial) {
                        XmlNode dir("dir");
                        dir.set("staff", std::to_string(v + 1));
                        dir.set("startid", "#" + note_id(v, n.serial));
                        dir.add_text(d.text);
                        controls.push_back({0, v, n.serial, std::move(dir)});
                        break;
                    }
                }
            }

            // bracket spans starting in this measure
            for (const auto& sp : ms.spans) {
                if (sp.voice != static_cast<int>(v)) continue;
                bool starts_here = false;
                for (const CmnNote& n : m.notes)
                    if (n.serial == sp.first_serial) starts_here = true;
                if (!starts_here) continue;
                XmlNode span("bracketSpan");
                span.set("staff", std::to_string(v + 1));
                span.set("startid", "#" + note_id(v, sp.first_serial));
                span.set("endid", "#" + note_id(v, sp.last_serial));
                if (sp.kind == SpanMarker::Kind::Ligature) {
                    span.set("func", "ligature");
                    span.set("lform", "solid");
                } else {
                    span.set("func", "coloration");
                    span.set("lstartsym", "angledown");
                    span.set("lendsym", "angledown");
                }
                controls.push_back({3, v, sp.first_serial, std::move(span)});
            }
        }

        std::stable_sort(controls.begin(), controls.end(),
                         [](const Control& a, const Control& b) {
                             if (a.order != b.order) return a.order < b.order;
                             if (a.voice != b.voice) return a.voice < b.voice;
                             return a.serial < b.serial;
                         });
        for (auto& c : controls) measure.children.emplace_back(std::move(c.node));
    }

    if (opt.mei_basic) detail::prune_to_basic(mei, report);
    return mei;
}

}  // namespace mensura
