#pragma once

// ScoreIR -> MEI mensural. CMME semantics with no direct MEI equivalent are
// preserved through a fixed @type vocabulary: "signum_congruentiae",
// "ellipsis", "lacuna", "cmme_tempo_change", "cmme_lig_accid". Durations are
// written under minima equivalence: the shape carries the nominal value and
// a num/numbase pair records any deviation so that
// nominal * numbase / num == written, exactly.

#include <mensura/cmn_transform.hpp>
#include <mensura/errors.hpp>
#include <mensura/report.hpp>
#include <mensura/score_model.hpp>
#include <mensura/xml.hpp>

#include <cctype>
#include <optional>
#include <string>
#include <vector>

namespace mensura {

struct MensuralWriteOptions {
    bool include_apparatus = true;
    std::string id_prefix = "m";
};

namespace detail {

inline std::string xml_safe_id(const std::string& raw) {
    std::string out;
    for (char c : raw)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')
                   ? c
                   : '_';
    if (out.empty()) out = "x";
    return out;
}

inline std::string mensural_dur_name(NoteShape s) {
    std::string n = note_shape_name(s);
    for (auto& c : n) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return n;
}

}  // namespace detail

// Shape as the duration attribute plus, when the written length deviates
// from the shape's nominal one, an exact num/numbase correction.
inline std::vector<std::pair<std::string, std::string>> duration_attributes(
    const ScoreEvent& ev, const Mensuration& m) {
    std::vector<std::pair<std::string, std::string>> attrs;
    attrs.emplace_back("dur", detail::mensural_dur_name(*ev.shape));
    Rational nominal = nominal_minima(*ev.shape, m);
    if (nominal != ev.written) {
        Rational ratio = nominal / ev.written;  // num/numbase
        attrs.emplace_back("num", std::to_string(ratio.num()));
        attrs.emplace_back("numbase", std::to_string(ratio.den()));
    }
    return attrs;
}

inline XmlNode encode_proportion(const Proportion& p) {
    XmlNode node("proport");
    node.set("num", std::to_string(p.num));
    node.set("numbase", std::to_string(p.den));
    if (p.tempo_change) node.set("type", "cmme_tempo_change");
    return node;
}

// Accidental on a ligated note: MEI has no native slot for it, so the accid
// child carries a workaround type and the report records the downgrade.
inline XmlNode encode_ligature_accidental(const ScoreEvent& note_ev, ConversionReport& report) {
    XmlNode accid("accid");
    accid.set("accid", detail::accid_code(*note_ev.pitch->accidental));
    accid.set("type", "cmme_lig_accid");
    report.warn("accidental inside a ligature has no native MEI encoding; typed cmme_lig_accid",
                note_ev.source.section, note_ev.source.voice, note_ev.source.ordinal);
    return accid;
}

namespace detail {

class MensuralEmitter {
public:
    MensuralEmitter(const MensuralWriteOptions& opt, ConversionReport& report)
        : opt_(opt), report_(report) {}

    // Emits events [begin, end) of a voice into `layer`, expanding apparatus
    // sites when requested.
    void emit_range(const VoiceStream& vs, const std::vector<VariantSite>& sites, size_t begin,
                    size_t end, int voice_no, XmlNode& layer, const std::string& id_scope) {
        Mensuration current;  // default C until a sign appears
        size_t i = begin;
        while (i < end) {
            const VariantSite* site = nullptr;
            if (opt_.include_apparatus) {
                for (const auto& s : sites)
                    if (s.voice == voice_no - 1 && s.position == i) { site = &s; break; }
            }
            if (site) {
                close_ligature(layer);
                layer.children.emplace_back(emit_app(vs, *site, voice_no, id_scope, current));
                i = site->position + site->default_count;
                continue;
            }
            emit_event(vs.events[i], voice_no, layer, id_scope, current);
            ++i;
        }
        close_ligature(layer);
    }

private:
    const MensuralWriteOptions& opt_;
    ConversionReport& report_;

    // open ligature buffering
    std::optional<XmlNode> lig_node_;
    int lig_id_ = 0;
    Rational last_keysig_onset_{-1};

    XmlNode& sink(XmlNode& layer) {
        return lig_node_ ? *lig_node_ : layer;
    }

    void close_ligature(XmlNode& layer) {
        if (lig_node_) {
            layer.children.emplace_back(std::move(*lig_node_));
            lig_node_.reset();
            lig_id_ = 0;
        }
    }

    void emit_event(const ScoreEvent& ev, int voice_no, XmlNode& layer,
                    const std::string& id_scope, Mensuration& current) {
        switch (ev.kind) {
            case EventKind::Note: {
                if (ev.is_space) return;  // synthetic filler has no mensural form
                handle_ligature_boundary(ev, layer);
                XmlNode note("note");
                note.set("xml:id", opt_.id_prefix + "-" + id_scope + "-e" +
                                       std::to_string(ev.uid));
                for (auto& [k, v] : duration_attributes(ev, current)) note.set(k, v);
                note.set("pname", pname(*ev.pitch));
                note.set("oct", std::to_string(ev.pitch->octave));
                if (ev.coloration_id > 0) note.set("colored", "true");
                if (ev.has_marker(marker::kCorona)) note.set("fermata", "above");
                if (ev.has_marker(marker::kSignum)) {
                    note.set("type", "signum_congruentiae");
                    report_.drop("signum congruentiae preserved via @type");
                }
                if (ev.pitch->accidental) {
                    if (ev.ligature_id > 0) {
                        note.children.emplace_back(encode_ligature_accidental(ev, report_));
                    } else {
                        XmlNode accid("accid");
                        accid.set("accid", accid_code(*ev.pitch->accidental));
                        note.children.emplace_back(std::move(accid));
                    }
                }
                if (!ev.syllable.empty()) {
                    XmlNode verse("verse");
                    verse.set("n", "1");
                    XmlNode syl("syl");
                    syl.add_text(ev.syllable);
                    verse.children.emplace_back(std::move(syl));
                    note.children.emplace_back(std::move(verse));
                }
                sink(layer).children.emplace_back(std::move(note));
                if (ev.ligature_id == 0) close_ligature(layer);
                break;
            }
            case EventKind::Rest: {
                if (ev.is_space) return;
                close_ligature(layer);
                XmlNode rest("rest");
                rest.set("xml:id", opt_.id_prefix + "-" + id_scope + "-e" +
                                       std::to_string(ev.uid));
                for (auto& [k, v] : duration_attributes(ev, current)) rest.set(k, v);
                layer.children.emplace_back(std::move(rest));
                break;
            }
            case EventKind::Dot: {
                XmlNode dot("dot");
                dot.set("form", ev.dot_kind == DotKind::Addition ? "aug" : "div");
                sink(layer).children.emplace_back(std::move(dot));
                break;
            }
            case EventKind::Clef: {
                const CmmeClef& c = *ev.clef;
                if (c.is_signature) {
                    emit_signature(ev, c, layer);
                    break;
                }
                close_ligature(layer);
                std::string shape = c.appearance;
                if (shape == "Gamma") shape = "G";
                if (shape != "C" && shape != "F" && shape != "G") {
                    report_.warn("clef appearance '" + c.appearance + "' not representable; "
                                 "skipped",
                                 ev.source.section, ev.source.voice, ev.source.ordinal);
                    break;
                }
                XmlNode clef("clef");
                clef.set("shape", shape);
                if (c.staff_loc % 2 == 0)
                    report_.warn("clef between staff lines; rounded down",
                                 ev.source.section, ev.source.voice, ev.source.ordinal);
                clef.set("line", std::to_string(std::max(1, (c.staff_loc + 1) / 2)));
                layer.children.emplace_back(std::move(clef));
                break;
            }
            case EventKind::Mensur: {
                close_ligature(layer);
                current = *ev.mensur;
                XmlNode mensur("mensur");
                char sign = ev.mensur->sign_char.value_or(
                    ev.mensur->tempus == Tempus::Perfect ? 'O' : 'C');
                mensur.set("sign", std::string(1, sign));
                if (ev.mensur->sign_dot) mensur.set("dot", "true");
                if (ev.mensur->cut) mensur.set("slash", "1");
                if (ev.mensur->number) mensur.set("num", std::to_string(*ev.mensur->number));
                mensur.set("tempus", ev.mensur->tempus == Tempus::Perfect ? "3" : "2");
                mensur.set("prolatio", ev.mensur->prolatio == Prolatio::Major ? "3" : "2");
                layer.children.emplace_back(std::move(mensur));
                break;
            }
            case EventKind::Proport: {
                close_ligature(layer);
                XmlNode p = encode_proportion(*ev.proport);
                if (ev.proport->tempo_change)
                    report_.drop("tempo-change proportion preserved via @type");
                layer.children.emplace_back(std::move(p));
                break;
            }
            case EventKind::Custos: {
                close_ligature(layer);
                XmlNode custos("custos");
                custos.set("pname", pname(*ev.pitch));
                custos.set("oct", std::to_string(ev.pitch->octave));
                layer.children.emplace_back(std::move(custos));
                break;
            }
            case EventKind::DirectiveSource: {
                close_ligature(layer);
                XmlNode dir("dir");
                dir.add_text(ev.text);
                layer.children.emplace_back(std::move(dir));
                break;
            }
            case EventKind::Marker: {
                if (ev.has_marker(marker::kEllipsis)) {
                    close_ligature(layer);
                    XmlNode gap("gap");
                    gap.set("type", "ellipsis");
                    if (ev.explicit_length)
                        gap.set("extent", ev.explicit_length->str() + " minima");
                    report_.drop("ellipsis gap preserved via @type");
                    layer.children.emplace_back(std::move(gap));
                }
                break;  // section breaks handled by the caller
            }
        }
    }

    void handle_ligature_boundary(const ScoreEvent& note, XmlNode& layer) {
        if (note.ligature_id == lig_id_) return;
        close_ligature(layer);
        if (note.ligature_id > 0) {
            XmlNode lig("ligature");
            std::string form = note.ligature_form.empty() ? "recta" : note.ligature_form;
            for (auto& c : form) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            lig.set("form", form);
            lig_node_ = std::move(lig);
            lig_id_ = note.ligature_id;
        }
    }

    void emit_signature(const ScoreEvent& ev, const CmmeClef& c, XmlNode& layer) {
        if (!c.pitch || c.pitch->step != 'B') {
            report_.warn("signature accidental on '" +
                             (c.pitch ? c.pitch->str() : c.appearance) +
                             "' not representable; skipped",
                         ev.source.section, ev.source.voice, ev.source.ordinal);
            return;
        }
        if (last_keysig_onset_ == ev.onset) return;  // coalesce stacked flats
        close_ligature(layer);
        XmlNode keysig("keySig");
        keysig.set("sig", "1f");
        layer.children.emplace_back(std::move(keysig));
        last_keysig_onset_ = ev.onset;
    }

    XmlNode emit_app(const VoiceStream& vs, const VariantSite& site, int voice_no,
                     const std::string& id_scope, Mensuration& current) {
        XmlNode app("app");
        XmlNode lem("lem");
        if (!site.default_sources.empty()) lem.set("source", source_refs(site.default_sources));
        {
            MensuralEmitter sub(opt_, report_);
            Mensuration m = current;
            XmlNode tmp("tmp");
            for (size_t j = site.position; j < site.position + site.default_count; ++j)
                sub.emit_event(vs.events[j], voice_no, tmp, id_scope, m);
            sub.close_ligature(tmp);
            lem.children = std::move(tmp.children);
            current = m;  // default reading carries the running state
        }
        app.children.emplace_back(std::move(lem));

        int rno = 0;
        for (const auto& r : site.readings) {
            ++rno;
            XmlNode rdg("rdg");
            if (!r.source_refs.empty()) rdg.set("source", source_refs(r.source_refs));
            if (r.lacuna) {
                rdg.set("type", "lacuna");
                report_.drop("lacuna reading preserved via @type");
            }
            MensuralEmitter sub(opt_, report_);
            Mensuration m = current;
            XmlNode tmp("tmp");
            std::string scope = id_scope + "-s" + std::to_string(site.position) + "-r" +
                                std::to_string(rno);
            long uid = 0;
            for (const auto& rev : r.events) {
                ScoreEvent copy = rev;
                copy.uid = uid++;
                sub.emit_event(copy, voice_no, tmp, scope, m);
            }
            sub.close_ligature(tmp);
            rdg.children = std::move(tmp.children);
            app.children.emplace_back(std::move(rdg));
        }
        return app;
    }

    static std::string source_refs(const std::vector<std::string>& ids) {
        std::string out;
        for (const auto& id : ids) {
            if (!out.empty()) out += ' ';
            out += "#src-" + xml_safe_id(id);
        }
        return out;
    }
};

}  // namespace detail

// Serializes ScoreIR as an MEI mensural document. Deterministic: two runs
// over the same IR produce byte-identical XML.
inline XmlNode write_mensural(const ScoreIR& ir, const MensuralWriteOptions& opt,
                              ConversionReport& report) {
    XmlNode mei("mei");
    mei.set("xmlns", "http://www.music-encoding.org/ns/mei");
    mei.set("meiversion", "5.0");

    XmlNode& head = mei.add_child(XmlNode("meiHead"));
    XmlNode& fileDesc = head.add_child(XmlNode("fileDesc"));
    XmlNode& titleStmt = fileDesc.add_child(XmlNode("titleStmt"));
    XmlNode& title = titleStmt.add_child(XmlNode("title"));
    if (!ir.title.empty()) title.add_text(ir.title);
    if (!ir.composer.empty() || !ir.editor.empty()) {
        XmlNode& resp = titleStmt.add_child(XmlNode("respStmt"));
        if (!ir.composer.empty()) {
            XmlNode& p = resp.add_child(XmlNode("persName"));
            p.set("role", "composer");
            p.add_text(ir.composer);
        }
        if (!ir.editor.empty()) {
            XmlNode& p = resp.add_child(XmlNode("persName"));
            p.set("role", "editor");
            p.add_text(ir.editor);
        }
    }
    fileDesc.add_child(XmlNode("pubStmt"));
    if (!ir.source_ids.empty()) {
        XmlNode& sourceDesc = fileDesc.add_child(XmlNode("sourceDesc"));
        for (const auto& [id, name] : ir.source_ids) {
            XmlNode& src = sourceDesc.add_child(XmlNode("source"));
            src.set("xml:id", "src-" + detail::xml_safe_id(id));
            XmlNode& bibl = src.add_child(XmlNode("bibl"));
            bibl.add_text(name);
        }
    }

    XmlNode& music = mei.add_child(XmlNode("music"));
    XmlNode& body = music.add_child(XmlNode("body"));
    XmlNode& mdiv = body.add_child(XmlNode("mdiv"));
    XmlNode& score = mdiv.add_child(XmlNode("score"));

    XmlNode& scoreDef = score.add_child(XmlNode("scoreDef"));
    XmlNode& staffGrp = scoreDef.add_child(XmlNode("staffGrp"));
    for (size_t v = 0; v < ir.voices.size(); ++v) {
        XmlNode& staffDef = staffGrp.add_child(XmlNode("staffDef"));
        staffDef.set("n", std::to_string(v + 1));
        staffDef.set("lines", "5");
        staffDef.set("notationtype", "mensural");
        if (!ir.voices[v].meta.name.empty()) staffDef.set("label", ir.voices[v].meta.name);
    }

    // one MEI section per CMME section, delimited by the IR section markers
    std::vector<std::vector<std::pair<size_t, size_t>>> segments;
    size_t n_segments = 0;
    for (const auto& vs : ir.voices) {
        segments.push_back(detail::section_segments(vs));
        n_segments = std::max(n_segments, segments.back().size());
    }
    if (n_segments == 0) n_segments = 1;

    for (size_t s = 0; s < n_segments; ++s) {
        XmlNode& section = score.add_child(XmlNode("section"));
        section.set("n", std::to_string(s + 1));
        for (size_t v = 0; v < ir.voices.size(); ++v) {
            XmlNode& staff = section.add_child(XmlNode("staff"));
            staff.set("n", std::to_string(v + 1));
            XmlNode& layer = staff.add_child(XmlNode("layer"));
            layer.set("n", "1");
            if (v >= segments.size() || s >= segments[v].size()) continue;
            auto [begin, end] = segments[v][s];
            detail::MensuralEmitter emitter(opt, report);
            emitter.emit_range(ir.voices[v], ir.apparatus, begin, end,
                               static_cast<int>(v) + 1, layer,
                               "v" + std::to_string(v + 1));
        }
    }
    return mei;
}

}  // namespace mensura
