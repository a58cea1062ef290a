#pragma once

// CMME-XML reader. Targets the subset of the CMME schema that the
// conversion consumes; everything else is kept as CmmeUnsupported events
// plus warnings so no input is dropped silently. See docs/cmme-subset.md
// for the exact grammar accepted.

#include <mensura/cmme_model.hpp>
#include <mensura/errors.hpp>
#include <mensura/xml.hpp>

#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mensura {

struct ParseContext {
    std::vector<Warning>* warnings = nullptr;
    int section = -1;
    int voice = -1;
    long ordinal = -1;

    void warn(std::string msg) const {
        if (warnings) warnings->push_back(Warning{std::move(msg), section, voice, ordinal});
    }
};

namespace detail {

[[noreturn]] inline void schema_error(const std::string& msg, const ParseContext& ctx) {
    Warning w{msg, ctx.section, ctx.voice, ctx.ordinal};
    throw MensuraError(ErrorCode::SchemaViolation, w.format());
}

inline long long parse_int(const XmlNode& el, const ParseContext& ctx) {
    std::string t = el.text();
    long long v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size())
        schema_error("<" + el.name + "> does not hold an integer: '" + t + "'", ctx);
    return v;
}

inline long long child_int(const XmlNode& el, std::string_view name, const ParseContext& ctx) {
    const XmlNode* c = el.child(name);
    if (!c) schema_error("<" + el.name + "> is missing <" + std::string(name) + ">", ctx);
    return parse_int(*c, ctx);
}

inline Rational parse_length(const XmlNode& len, const ParseContext& ctx) {
    long long num = child_int(len, "Num", ctx);
    long long den = len.has_child("Den") ? child_int(len, "Den", ctx) : 1;
    if (num <= 0 || den <= 0)
        schema_error("length must be a positive rational, got " + std::to_string(num) + "/" +
                         std::to_string(den), ctx);
    return Rational(num, den);
}

inline std::optional<NoteShape> shape_from_name(std::string_view s) {
    if (s == "Maxima") return NoteShape::Maxima;
    if (s == "Longa") return NoteShape::Longa;
    if (s == "Brevis") return NoteShape::Brevis;
    if (s == "Semibrevis") return NoteShape::Semibrevis;
    if (s == "Minima") return NoteShape::Minima;
    if (s == "Semiminima") return NoteShape::Semiminima;
    if (s == "Fusa") return NoteShape::Fusa;
    if (s == "Semifusa") return NoteShape::Semifusa;
    return std::nullopt;
}

inline NoteShape parse_shape(const XmlNode& el, const ParseContext& ctx) {
    std::string t = el.child_text("Type");
    if (t.empty()) schema_error("<" + el.name + "> is missing <Type>", ctx);
    auto s = shape_from_name(t);
    if (!s) schema_error("unknown note shape '" + t + "'", ctx);
    return *s;
}

inline Pitch parse_pitch_fields(const XmlNode& el, const ParseContext& ctx) {
    const XmlNode* letter = el.child("LetterName");
    const XmlNode* oct = el.child("OctaveNum");
    if (!letter || !oct)
        schema_error("<" + el.name + "> needs <LetterName> and <OctaveNum>", ctx);
    std::string l = letter->text();
    if (l.size() != 1 || l[0] < 'A' || l[0] > 'G')
        schema_error("bad letter name '" + l + "'", ctx);
    Pitch p;
    p.step = l[0];
    p.octave = static_cast<int>(parse_int(*oct, ctx));
    if (const XmlNode* acc = el.child("Accidental")) {
        std::string a = acc->text();
        if (a == "Flat") p.accidental = AccidentalKind::Flat;
        else if (a == "Natural") p.accidental = AccidentalKind::Natural;
        else if (a == "Sharp") p.accidental = AccidentalKind::Sharp;
        else schema_error("unknown accidental '" + a + "'", ctx);
    }
    return p;
}

inline std::string flatten_text(const XmlNode& el) {
    std::string out;
    for (const auto& c : el.children) {
        if (const auto* t = std::get_if<std::string>(&c)) {
            if (!out.empty()) out += ' ';
            out += *t;
        } else {
            std::string inner = flatten_text(std::get<XmlNode>(c));
            if (!inner.empty()) {
                if (!out.empty()) out += ' ';
                out += inner;
            }
        }
    }
    return out;
}

inline void warn_unknown_children(const XmlNode& el, const std::vector<std::string_view>& known,
                                  const std::vector<std::string_view>& ignored,
                                  const ParseContext& ctx) {
    for (const XmlNode* c : el.child_elements()) {
        bool is_known = false;
        for (auto k : known)
            if (c->name == k) { is_known = true; break; }
        for (auto k : ignored)
            if (c->name == k) { is_known = true; break; }
        if (!is_known)
            ctx.warn("ignored unknown <" + c->name + "> inside <" + el.name + ">");
    }
}

}  // namespace detail

CmmeEvent parse_event(const XmlNode& el, ParseContext& ctx);

namespace detail {

inline std::vector<CmmeEvent> parse_event_sequence(const XmlNode& parent, ParseContext& ctx);

inline CmmeNote parse_note(const XmlNode& el, ParseContext& ctx) {
    CmmeNote n;
    n.shape = parse_shape(el, ctx);
    n.pitch = parse_pitch_fields(el, ctx);
    if (const XmlNode* len = el.child("Length")) n.explicit_length = parse_length(*len, ctx);
    if (const XmlNode* lig = el.child("Lig")) {
        n.ligature_form = lig->text().empty() ? "Recta" : lig->text();
    }
    n.colored = el.has_child("Colored");
    n.corona = el.has_child("Corona");
    n.signum = el.has_child("Signum");
    if (const XmlNode* stem = el.child("Stem")) {
        n.stem = stem->child_text("Dir");
        std::string side = stem->child_text("Side");
        if (!side.empty()) n.stem += (n.stem.empty() ? "" : " ") + side;
    }
    if (const XmlNode* mt = el.child("ModernText")) n.syllable = mt->child_text("Syllable");
    warn_unknown_children(el,
                          {"Type", "LetterName", "OctaveNum", "Accidental", "Length", "Lig",
                           "Colored", "Corona", "Signum", "Stem", "ModernText"},
                          {"HalfColoration", "StaffLoc"}, ctx);
    return n;
}

inline CmmeRest parse_rest(const XmlNode& el, ParseContext& ctx) {
    CmmeRest r;
    r.shape = parse_shape(el, ctx);
    if (const XmlNode* len = el.child("Length")) r.explicit_length = parse_length(*len, ctx);
    warn_unknown_children(el, {"Type", "Length"}, {"BottomStaffLine", "NumSpaces", "Corona"},
                          ctx);
    return r;
}

inline CmmeClef parse_clef(const XmlNode& el, ParseContext& ctx) {
    CmmeClef c;
    c.appearance = el.child_text("Appearance");
    if (c.appearance.empty()) schema_error("<Clef> is missing <Appearance>", ctx);
    c.staff_loc = static_cast<int>(child_int(el, "StaffLoc", ctx));
    if (el.has_child("Displacement"))
        c.displacement = static_cast<int>(child_int(el, "Displacement", ctx));
    c.is_signature = el.has_child("Signature");
    if (const XmlNode* p = el.child("Pitch")) c.pitch = parse_pitch_fields(*p, ctx);
    warn_unknown_children(el, {"Appearance", "StaffLoc", "Displacement", "Signature", "Pitch"},
                          {}, ctx);
    return c;
}

inline CmmeMensuration parse_mensuration(const XmlNode& el, ParseContext& ctx) {
    CmmeMensuration m;
    const XmlNode* sign = el.child("Sign");
    const XmlNode* info = el.child("MensInfo");
    if (!sign && !info)
        schema_error("<Mensuration> needs <Sign> or <MensInfo>", ctx);
    if (sign) {
        std::string sym = sign->child_text("MainSymbol");
        if (sym == "O") m.sign = 'O';
        else if (sym == "C") m.sign = 'C';
        else if (!sym.empty()) schema_error("unknown mensuration symbol '" + sym + "'", ctx);
        m.dot = sign->has_child("Dot");
        if (sign->has_child("Strokes"))
            m.strokes = static_cast<int>(child_int(*sign, "Strokes", ctx));
        if (const XmlNode* number = sign->child("Number")) {
            m.number = static_cast<int>(number->has_child("Num") ? child_int(*number, "Num", ctx)
                                                                 : parse_int(*number, ctx));
        }
    }
    if (info) {
        if (info->has_child("Tempus"))
            m.tempus = static_cast<int>(child_int(*info, "Tempus", ctx));
        if (info->has_child("Prolatio"))
            m.prolatio = static_cast<int>(child_int(*info, "Prolatio", ctx));
        warn_unknown_children(*info, {"Tempus", "Prolatio"}, {"ModusMinor", "ModusMaior"}, ctx);
    }
    if (el.has_child("NoScoreEffect"))
        ctx.warn("<NoScoreEffect> on mensuration ignored; sign treated as effective");
    warn_unknown_children(el, {"Sign", "MensInfo", "NoScoreEffect"}, {"StaffLoc", "Orientation"},
                          ctx);
    return m;
}

inline CmmeProportion parse_proportion(const XmlNode& el, ParseContext& ctx) {
    CmmeProportion p;
    p.num = child_int(el, "Num", ctx);
    p.den = child_int(el, "Den", ctx);
    p.tempo_change = el.has_child("TempoChange");
    warn_unknown_children(el, {"Num", "Den", "TempoChange"}, {}, ctx);
    return p;
}

inline CmmeVariantGroup parse_variants(const XmlNode& el, ParseContext& ctx) {
    CmmeVariantGroup g;
    std::vector<const XmlNode*> readings = el.children_named("Reading");
    if (readings.empty()) schema_error("<VariantReadings> has no <Reading>", ctx);

    struct Parsed {
        CmmeReading reading;
        bool preferred = false;
        bool is_default = false;
    };
    std::vector<Parsed> parsed;
    for (const XmlNode* r : readings) {
        Parsed p;
        for (const XmlNode* id : r->children_named("VariantVersionID")) {
            std::string v = id->text();
            if (v == "DEFAULT") p.is_default = true;
            p.reading.source_refs.push_back(std::move(v));
        }
        p.preferred = r->has_child("PreferredReading");
        p.reading.lacuna = r->has_child("Lacuna");
        if (const XmlNode* music = r->child("Music")) {
            p.reading.events = parse_event_sequence(*music, ctx);
        } else if (!p.reading.lacuna) {
            schema_error("<Reading> needs <Music> or <Lacuna>", ctx);
        }
        parsed.push_back(std::move(p));
    }
    size_t def = 0;
    bool found = false;
    for (size_t i = 0; i < parsed.size() && !found; ++i)
        if (parsed[i].is_default) { def = i; found = true; }
    for (size_t i = 0; i < parsed.size() && !found; ++i)
        if (parsed[i].preferred) { def = i; found = true; }
    g.default_sources = parsed[def].reading.source_refs;
    g.default_events = std::move(parsed[def].reading.events);
    for (size_t i = 0; i < parsed.size(); ++i)
        if (i != def) g.readings.push_back(std::move(parsed[i].reading));
    return g;
}

// Converts the CMME "ligated to next" markers into well-nested
// Start/Mid/End runs; repairs an unterminated trailing run with a warning.
inline void resolve_ligature_flags(std::vector<CmmeEvent>& events, const ParseContext& ctx) {
    CmmeNote* last_in_run = nullptr;
    bool in_run = false;
    for (auto& ev : events) {
        CmmeNote* n = ev.as<CmmeNote>();
        if (!n) continue;
        bool to_next = !n->ligature_form.empty();
        if (!in_run && to_next) {
            n->ligature = LigatureFlag::Start;
            in_run = true;
        } else if (in_run && to_next) {
            n->ligature = LigatureFlag::Mid;
        } else if (in_run) {
            n->ligature = LigatureFlag::End;
            in_run = false;
        }
        if (to_next) last_in_run = n;
    }
    if (in_run && last_in_run) {
        if (last_in_run->ligature == LigatureFlag::Start) last_in_run->ligature = LigatureFlag::None;
        else last_in_run->ligature = LigatureFlag::End;
        ctx.warn("unterminated ligature closed at end of event list");
    }
}

inline std::vector<CmmeEvent> parse_event_sequence(const XmlNode& parent, ParseContext& ctx) {
    std::vector<CmmeEvent> out;
    for (const XmlNode* c : parent.child_elements()) out.push_back(parse_event(*c, ctx));
    resolve_ligature_flags(out, ctx);
    return out;
}

}  // namespace detail

// Maps one event-list element to its tagged-union case. Unknown tags become
// CmmeUnsupported; structurally broken known tags throw SchemaViolation.
inline CmmeEvent parse_event(const XmlNode& el, ParseContext& ctx) {
    using namespace detail;
    const std::string& t = el.name;
    if (t == "Note") return parse_note(el, ctx);
    if (t == "Rest") return parse_rest(el, ctx);
    if (t == "Dot") {
        CmmeDot d;
        if (el.child_text("Kind") == "Division") d.kind = DotKind::Division;
        return d;
    }
    if (t == "Clef") return parse_clef(el, ctx);
    if (t == "Mensuration") return parse_mensuration(el, ctx);
    if (t == "Proportion") return parse_proportion(el, ctx);
    if (t == "ColorChange") return CmmeColorChange{flatten_text(el)};
    if (t == "Custos") return CmmeCustos{parse_pitch_fields(el, ctx)};
    if (t == "OriginalText") {
        std::string text;
        for (const XmlNode* p : el.children_named("Phrase")) {
            if (!text.empty()) text += ' ';
            text += p->text();
        }
        if (text.empty()) text = el.text();
        return CmmeOriginalText{std::move(text)};
    }
    if (t == "LineEnd") return CmmeLineEnd{el.has_child("PageEnd")};
    if (t == "Ellipsis") {
        CmmeEllipsis e;
        if (const XmlNode* len = el.child("Length")) e.extent = parse_length(*len, ctx);
        return e;
    }
    if (t == "MultiEvent") return CmmeMultiEvent{parse_event_sequence(el, ctx)};
    if (t == "VariantReadings") return parse_variants(el, ctx);

    std::string raw;
    serialize_node(raw, el, 0);
    while (!raw.empty() && (raw.back() == '\n' || raw.back() == ' ')) raw.pop_back();
    return CmmeUnsupported{t, std::move(raw)};
}

namespace detail {

inline void parse_general_data(const XmlNode& gd, CmmeDocument& doc, ParseContext& ctx) {
    doc.title = gd.child_text("Title");
    doc.composer = gd.child_text("Composer");
    doc.editor = gd.child_text("Editor");
    for (const XmlNode* vv : gd.children_named("VariantVersion")) {
        std::string id = vv->child_text("ID");
        if (id.empty()) schema_error("<VariantVersion> is missing <ID>", ctx);
        std::string name;
        if (const XmlNode* src = vv->child("Source")) name = src->child_text("Name");
        if (name.empty()) name = id;
        doc.source_ids.emplace_back(std::move(id), std::move(name));
    }
    warn_unknown_children(gd, {"Title", "Composer", "Editor", "VariantVersion"},
                          {"Section", "Notes", "PublicNotes", "Incipit", "BaseColoration"}, ctx);
}

inline void parse_voice_data(const XmlNode& vd, CmmeDocument& doc, ParseContext& ctx) {
    int declared = -1;
    if (vd.has_child("NumVoices")) declared = static_cast<int>(child_int(vd, "NumVoices", ctx));
    int idx = 0;
    for (const XmlNode* v : vd.children_named("Voice")) {
        CmmeVoiceMeta meta;
        meta.index = ++idx;
        meta.name = v->child_text("Name");
        meta.editorial = v->has_child("Editorial");
        doc.voices.push_back(std::move(meta));
    }
    if (declared >= 0 && declared != idx)
        ctx.warn("NumVoices declares " + std::to_string(declared) + " voices but " +
                 std::to_string(idx) + " are defined");
}

inline CmmeSection parse_section(const XmlNode& sec, CmmeDocument& doc, ParseContext& ctx) {
    CmmeSection s;
    const XmlNode* content = nullptr;
    for (const XmlNode* c : sec.child_elements()) {
        if (content) {
            ctx.warn("extra <" + c->name + "> in <MusicSection> ignored");
            continue;
        }
        content = c;
    }
    if (!content) {
        s.kind = SectionKind::TextOnly;
        return s;
    }
    if (content->name == "MensuralMusic") {
        s.kind = SectionKind::Mensural;
    } else if (content->name == "Plainchant") {
        s.kind = SectionKind::Plainchant;
        return s;
    } else {
        s.kind = SectionKind::TextOnly;
        if (content->name != "Text")
            ctx.warn("section content <" + content->name + "> treated as text-only");
        return s;
    }

    for (const XmlNode* v : content->children_named("Voice")) {
        ParseContext vctx = ctx;
        int vnum = static_cast<int>(child_int(*v, "VoiceNum", vctx));
        if (vnum < 1 || vnum > static_cast<int>(doc.voices.size()))
            schema_error("VoiceNum " + std::to_string(vnum) + " not declared in <VoiceData>",
                         vctx);
        vctx.voice = vnum;
        const XmlNode* list = v->child("EventList");
        if (!list) schema_error("<Voice> is missing <EventList>", vctx);
        std::vector<CmmeEvent> events;
        long ord = 0;
        for (const XmlNode* c : list->child_elements()) {
            vctx.ordinal = ord++;
            events.push_back(parse_event(*c, vctx));
        }
        vctx.ordinal = -1;
        resolve_ligature_flags(events, vctx);
        if (s.voice_events.count(vnum))
            ctx.warn("voice " + std::to_string(vnum) + " listed twice in a section; merged");
        auto& slot = s.voice_events[vnum];
        slot.insert(slot.end(), std::make_move_iterator(events.begin()),
                    std::make_move_iterator(events.end()));
    }
    warn_unknown_children(*content, {"Voice"}, {"NumVoices", "BaseColoration", "TacetInstruction"},
                          ctx);
    return s;
}

}  // namespace detail

// Parses CMME-XML bytes into a CmmeDocument. Throws MensuraError with
// MalformedXml / NotCmme / SchemaViolation.
inline CmmeDocument parse_document(std::string_view bytes) {
    XmlNode root = parse_xml(bytes);
    if (root.name != "Piece")
        throw MensuraError(ErrorCode::NotCmme,
                           "root element is <" + root.name + ">, expected <Piece>");
    CmmeDocument doc;
    ParseContext ctx;
    ctx.warnings = &doc.parse_warnings;

    if (const XmlNode* gd = root.child("GeneralData")) detail::parse_general_data(*gd, doc, ctx);
    if (const XmlNode* vd = root.child("VoiceData")) detail::parse_voice_data(*vd, doc, ctx);

    int section_no = 0;
    for (const XmlNode* c : root.child_elements()) {
        if (c->name == "GeneralData" || c->name == "VoiceData") continue;
        if (c->name != "MusicSection") {
            ctx.warn("ignored unknown <" + c->name + "> inside <Piece>");
            continue;
        }
        ParseContext sctx = ctx;
        sctx.section = ++section_no;
        CmmeSection s = detail::parse_section(*c, doc, sctx);
        bool has_music = false;
        for (const auto& [_, evs] : s.voice_events) has_music |= !evs.empty();
        if (has_music && doc.voices.empty())
            detail::schema_error("music present but no voices declared", sctx);
        doc.sections.push_back(std::move(s));
    }
    return doc;
}

// One warning per unsupported event and per non-mensural section, plus the
// parser's own notes. Pure over the document, so re-running it is stable.
inline std::vector<Warning> collect_warnings(const CmmeDocument& doc) {
    std::vector<Warning> out;

    struct Walker {
        std::vector<Warning>* out;
        void walk(const std::vector<CmmeEvent>& events, int section, int voice, long top_ordinal) {
            long ord = 0;
            for (const auto& ev : events) {
                long here = top_ordinal >= 0 ? top_ordinal : ord;
                if (const auto* u = ev.as<CmmeUnsupported>()) {
                    out->push_back(Warning{"unsupported element <" + u->tag + ">", section, voice,
                                           here});
                } else if (const auto* m = ev.as<CmmeMultiEvent>()) {
                    walk(m->events, section, voice, here);
                } else if (const auto* g = ev.as<CmmeVariantGroup>()) {
                    walk(g->default_events, section, voice, here);
                    for (const auto& r : g->readings) walk(r.events, section, voice, here);
                }
                ++ord;
            }
        }
    } walker{&out};

    int section_no = 0;
    for (const auto& sec : doc.sections) {
        ++section_no;
        if (sec.kind != SectionKind::Mensural) {
            out.push_back(Warning{std::string("skipping ") + section_kind_name(sec.kind) +
                                      " section (not converted)",
                                  section_no});
            continue;
        }
        for (const auto& [vnum, events] : sec.voice_events)
            walker.walk(events, section_no, vnum, -1);
    }
    out.insert(out.end(), doc.parse_warnings.begin(), doc.parse_warnings.end());
    return out;
}

}  // namespace mensura
