#pragma once

// ScoreIR: normalized per-voice event streams with resolved mensuration
// state, proportion stacks and exact sounding durations in minima. The
// variant apparatus is retained here (not flattened); the CMN side resolves
// it via flatten_editorial.

#include <mensura/cmme_model.hpp>
#include <mensura/cmme_parser.hpp>
#include <mensura/errors.hpp>
#include <mensura/report.hpp>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mensura {

enum class Tempus { Perfect, Imperfect };
enum class Prolatio { Major, Minor };

struct Mensuration {
    Tempus tempus = Tempus::Imperfect;
    Prolatio prolatio = Prolatio::Minor;
    std::string sign_text = "C";
    bool cut = false;
    std::optional<int> number;
    std::optional<char> sign_char;  // drawn symbol, when one was drawn
    bool sign_dot = false;          // drawn dot

    bool operator==(const Mensuration&) const = default;

    // Drawn sign plus the resolved divisions. An explicit MensInfo wins over
    // what the sign implies (O -> perfect tempus, dot -> major prolation).
    static Mensuration resolve(const CmmeMensuration& c) {
        Mensuration m;
        if (c.sign) {
            m.tempus = (*c.sign == 'O') ? Tempus::Perfect : Tempus::Imperfect;
            m.prolatio = c.dot ? Prolatio::Major : Prolatio::Minor;
        }
        if (c.tempus) m.tempus = (*c.tempus == 3) ? Tempus::Perfect : Tempus::Imperfect;
        if (c.prolatio) m.prolatio = (*c.prolatio == 3) ? Prolatio::Major : Prolatio::Minor;
        m.cut = c.strokes > 0;
        m.number = c.number;
        m.sign_char = c.sign;
        m.sign_dot = c.sign ? c.dot : (m.prolatio == Prolatio::Major);

        char base = c.sign ? *c.sign : (m.tempus == Tempus::Perfect ? 'O' : 'C');
        if (m.cut)
            m.sign_text = (base == 'C') ? "¢" : "Ø";  // cent / slashed O
        else
            m.sign_text = std::string(1, base);
        if (m.sign_dot) m.sign_text += "·";
        if (m.number) m.sign_text += std::to_string(*m.number);
        return m;
    }
};

struct Proportion {
    long long num = 1;
    long long den = 1;
    bool tempo_change = false;
    bool operator==(const Proportion&) const = default;
};

// Stack of active proportions. A proportion num:den scales sounding
// duration by den/num; tempo changes are recorded but contribute factor 1.
// A literal 1:1 (non tempo change) resets the stack.
class ProportionState {
public:
    void apply(const Proportion& p) {
        if (p.num == 1 && p.den == 1 && !p.tempo_change) {
            stack_.clear();
            return;
        }
        stack_.push_back(p);
    }

    // Multiplier from written to sounding duration.
    Rational factor() const {
        Rational f(1);
        for (const auto& p : stack_)
            if (!p.tempo_change) f *= Rational(p.den, p.num);
        return f;
    }

    // Combined num:den over the stack, reduced; the tuplet ratio on the CMN
    // side. {1,1} when no effective proportion is active.
    std::pair<long long, long long> effective_ratio() const {
        Rational r(1);
        for (const auto& p : stack_)
            if (!p.tempo_change) r *= Rational(p.num, p.den);
        return {r.num(), r.den()};
    }

    bool empty() const { return stack_.empty(); }
    const std::vector<Proportion>& stack() const { return stack_; }

private:
    std::vector<Proportion> stack_;
};

namespace marker {
inline constexpr uint8_t kSignum = 1;
inline constexpr uint8_t kEllipsis = 2;
inline constexpr uint8_t kLacuna = 4;
inline constexpr uint8_t kCorona = 8;
inline constexpr uint8_t kSectionBreak = 16;
}  // namespace marker

struct SourceLoc {
    int section = -1;
    int voice = -1;    // 1-based declaration index
    long ordinal = -1; // top-level position in the CMME event list
    bool operator==(const SourceLoc&) const = default;
};

enum class EventKind { Note, Rest, Clef, Mensur, Proport, Dot, Custos, DirectiveSource, Marker };

struct ScoreEvent {
    EventKind kind = EventKind::Marker;

    Rational written;   // minima, before proportions
    Rational sounding;  // minima, after proportions
    Rational onset;     // voice-relative minima

    std::optional<NoteShape> shape;
    std::optional<Pitch> pitch;             // notes and custos
    std::optional<Rational> explicit_length;
    bool dot_augmented = false;             // trailing addition dot folded in
    bool is_space = false;                  // synthetic filler (tacet sections)

    int ligature_id = 0;                    // 0 = none
    int coloration_id = 0;
    uint8_t markers = 0;
    std::string ligature_form;
    std::string syllable;
    std::string text;                       // directive-source payload

    std::optional<Mensuration> mensur;
    std::optional<Proportion> proport;
    DotKind dot_kind = DotKind::Addition;
    std::optional<CmmeClef> clef;

    // Effective proportion ratio at this event's onset (reduced).
    long long prop_num = 1;
    long long prop_den = 1;

    SourceLoc source;
    long uid = -1;  // per-voice identity, stable through barring

    bool durational() const {
        return kind == EventKind::Note || kind == EventKind::Rest ||
               (kind == EventKind::Marker && !sounding.is_zero());
    }
    bool has_marker(uint8_t m) const { return (markers & m) != 0; }
};

struct VoiceStream {
    CmmeVoiceMeta meta;
    std::vector<ScoreEvent> events;

    Rational total_span() const {
        Rational end(0);
        for (const auto& ev : events) end = std::max(end, ev.onset + ev.sounding);
        return end;
    }
};

struct VariantReadingIR {
    std::vector<std::string> source_refs;
    std::vector<ScoreEvent> events;
    bool lacuna = false;
    Rational total_sounding;
};

struct VariantSite {
    int voice = 0;            // 0-based index into ScoreIR::voices
    size_t position = 0;      // index of the first default event in the stream
    size_t default_count = 0;
    Rational onset;
    std::vector<std::string> default_sources;
    std::vector<ScoreEvent> default_events;
    std::vector<VariantReadingIR> readings;
};

struct VariantSelector {
    enum class Mode { Default, BySource };
    Mode mode = Mode::Default;
    std::string source_id;

    static VariantSelector defaults() { return {}; }
    static VariantSelector by_source(std::string id) {
        return {Mode::BySource, std::move(id)};
    }
};

struct ScoreIR {
    std::string title;
    std::string composer;
    std::string editor;
    std::vector<std::pair<std::string, std::string>> source_ids;
    std::vector<VoiceStream> voices;       // declaration order, index 0 = top
    std::vector<VariantSite> apparatus;
    int num_sections = 0;                  // mensural sections carried over
};

// ---------------------------------------------------------------------------
// Duration resolution

// Unproportioned span of a shape under a mensuration, in minima. Modus is
// treated as imperfect; CMME supplies explicit lengths where that matters.
inline Rational nominal_minima(NoteShape shape, const Mensuration& m) {
    Rational semibrevis(m.prolatio == Prolatio::Major ? 3 : 2);
    Rational brevis = semibrevis * Rational(m.tempus == Tempus::Perfect ? 3 : 2);
    switch (shape) {
        case NoteShape::Minima: return Rational(1);
        case NoteShape::Semiminima: return Rational(1, 2);
        case NoteShape::Fusa: return Rational(1, 4);
        case NoteShape::Semifusa: return Rational(1, 8);
        case NoteShape::Semibrevis: return semibrevis;
        case NoteShape::Brevis: return brevis;
        case NoteShape::Longa: return brevis * Rational(2);
        case NoteShape::Maxima: return brevis * Rational(4);
    }
    return Rational(1);
}

// CMME pre-resolves imperfection and alteration into explicit lengths, so an
// explicit length always wins over the nominal one.
inline Rational written_minima(NoteShape shape, const std::optional<Rational>& explicit_len,
                               const Mensuration& m) {
    return explicit_len ? *explicit_len : nominal_minima(shape, m);
}

inline Rational written_minima(const CmmeNote& n, const Mensuration& m) {
    return written_minima(n.shape, n.explicit_length, m);
}
inline Rational written_minima(const CmmeRest& r, const Mensuration& m) {
    return written_minima(r.shape, r.explicit_length, m);
}

inline Rational sounding_minima(const Rational& written, const ProportionState& p) {
    return written * p.factor();
}

// ---------------------------------------------------------------------------
// State threading

struct VoiceState {
    Mensuration mensur;        // default sign "C" until a sign appears
    ProportionState props;
    Rational cursor;
    bool mensur_seen = false;
};

namespace detail {

// Resolves written/sounding/onset for a run of events, mutating the state.
// Shared by the initial build, the apparatus readings, and re-threading
// after a reading has been spliced in.
inline void thread_run(std::vector<ScoreEvent>& events, size_t begin, size_t end, VoiceState& st,
                       ConversionReport& report) {
    for (size_t i = begin; i < end; ++i) {
        ScoreEvent& ev = events[i];
        ev.onset = st.cursor;
        auto [pn, pd] = st.props.effective_ratio();
        ev.prop_num = pn;
        ev.prop_den = pd;
        switch (ev.kind) {
            case EventKind::Note:
            case EventKind::Rest: {
                ev.dot_augmented = false;
                if (ev.is_space) {
                    // synthetic filler: absolute time, immune to proportions
                    ev.written = ev.explicit_length.value_or(Rational(0));
                    ev.sounding = ev.written;
                    ev.prop_num = 1;
                    ev.prop_den = 1;
                } else {
                    ev.written = written_minima(*ev.shape, ev.explicit_length, st.mensur);
                    ev.sounding = sounding_minima(ev.written, st.props);
                }
                st.cursor += ev.sounding;
                break;
            }
            case EventKind::Dot: {
                ev.written = Rational(0);
                ev.sounding = Rational(0);
                if (ev.dot_kind == DotKind::Addition && i > begin) {
                    ScoreEvent& prev = events[i - 1];
                    bool durational_prev =
                        prev.kind == EventKind::Note || prev.kind == EventKind::Rest;
                    if (durational_prev && !prev.explicit_length && !prev.dot_augmented &&
                        !prev.is_space) {
                        prev.dot_augmented = true;
                        prev.written *= Rational(3, 2);
                        prev.sounding *= Rational(3, 2);
                        st.cursor = prev.onset + prev.sounding;
                        ev.onset = st.cursor;
                    }
                }
                break;
            }
            case EventKind::Mensur: {
                st.mensur = *ev.mensur;
                st.mensur_seen = true;
                ev.written = Rational(0);
                ev.sounding = Rational(0);
                break;
            }
            case EventKind::Proport: {
                const Proportion& p = *ev.proport;
                if (p.num == 0 || p.den == 0)
                    throw MensuraError(ErrorCode::NegativeState,
                                       "proportion " + std::to_string(p.num) + "/" +
                                           std::to_string(p.den) + " has a zero term");
                st.props.apply(p);
                ev.written = Rational(0);
                ev.sounding = Rational(0);
                auto [n2, d2] = st.props.effective_ratio();
                ev.prop_num = n2;
                ev.prop_den = d2;
                break;
            }
            case EventKind::Marker: {
                // gap extents are absolute time, immune to proportions
                ev.written = ev.explicit_length.value_or(Rational(0));
                ev.sounding = ev.written;
                ev.prop_num = 1;
                ev.prop_den = 1;
                st.cursor += ev.sounding;
                break;
            }
            default: {
                ev.written = Rational(0);
                ev.sounding = Rational(0);
                break;
            }
        }
    }
    (void)report;
}

// Section segments delimited by the section-break markers that the
// lowering stage inserts at the head of every section.
inline std::vector<std::pair<size_t, size_t>> section_segments(const VoiceStream& vs) {
    std::vector<std::pair<size_t, size_t>> segs;
    size_t start = 0;
    bool open = false;
    for (size_t i = 0; i < vs.events.size(); ++i) {
        const ScoreEvent& ev = vs.events[i];
        if (ev.kind == EventKind::Marker && ev.has_marker(marker::kSectionBreak)) {
            if (open) segs.emplace_back(start, i);
            start = i;
            open = true;
        }
    }
    if (open) segs.emplace_back(start, vs.events.size());
    else if (!vs.events.empty()) segs.emplace_back(0, vs.events.size());
    return segs;
}

// Threads all voices section by section in lockstep so that every voice
// spans the same total; a short or tacet voice is padded with a synthetic
// space and noted. Site positions are kept valid across pad insertion.
inline void thread_and_pad(std::vector<VoiceStream>& voices, ConversionReport& report,
                           std::vector<VariantSite>* sites) {
    std::vector<std::vector<std::pair<size_t, size_t>>> segments;
    segments.reserve(voices.size());
    size_t n_segments = 0;
    for (const auto& vs : voices) {
        segments.push_back(section_segments(vs));
        n_segments = std::max(n_segments, segments.back().size());
    }
    std::vector<VoiceState> states(voices.size());
    for (size_t s = 0; s < n_segments; ++s) {
        std::vector<Rational> spans(voices.size());
        Rational max_span(0);
        for (size_t v = 0; v < voices.size(); ++v) {
            if (s >= segments[v].size()) continue;
            Rational before = states[v].cursor;
            thread_run(voices[v].events, segments[v][s].first, segments[v][s].second, states[v],
                       report);
            spans[v] = states[v].cursor - before;
            max_span = std::max(max_span, spans[v]);
        }
        for (size_t v = 0; v < voices.size(); ++v) {
            if (s >= segments[v].size() || spans[v] == max_span) continue;
            ScoreEvent pad;
            pad.kind = EventKind::Rest;
            pad.is_space = true;
            pad.explicit_length = max_span - spans[v];
            pad.written = *pad.explicit_length;
            pad.sounding = pad.written;
            pad.onset = states[v].cursor;
            pad.source = SourceLoc{-1, static_cast<int>(v) + 1, -1};
            states[v].cursor += pad.sounding;
            size_t insert_at = segments[v][s].second;
            voices[v].events.insert(
                voices[v].events.begin() + static_cast<std::ptrdiff_t>(insert_at), pad);
            for (size_t s2 = s + 1; s2 < segments[v].size(); ++s2) {
                ++segments[v][s2].first;
                ++segments[v][s2].second;
            }
            if (sites) {
                for (auto& site : *sites)
                    if (site.voice == static_cast<int>(v) && site.position >= insert_at)
                        ++site.position;
            }
            report.warn("voice shorter than section; padded " + (max_span - spans[v]).str() +
                            " minima",
                        -1, static_cast<int>(v) + 1);
        }
    }
}

// Replays state changes to recover the VoiceState just before `pos`.
inline VoiceState state_at(const VoiceStream& vs, size_t pos) {
    VoiceState st;
    for (size_t i = 0; i < pos && i < vs.events.size(); ++i) {
        const ScoreEvent& ev = vs.events[i];
        if (ev.kind == EventKind::Mensur) {
            st.mensur = *ev.mensur;
            st.mensur_seen = true;
        } else if (ev.kind == EventKind::Proport) {
            st.props.apply(*ev.proport);
        }
        st.cursor = ev.onset + ev.sounding;
    }
    return st;
}

struct LowerContext {
    int section = -1;   // 1-based document section
    int voice = -1;     // 1-based
    int voice_index = 0;
    long top_ordinal = -1;
    int* lig_counter = nullptr;
    int* color_counter = nullptr;
    ConversionReport* report = nullptr;
};

inline void lower_events(const std::vector<CmmeEvent>& src, std::vector<ScoreEvent>& out,
                         std::vector<VariantSite>* sites, LowerContext& ctx);

inline ScoreEvent base_event(EventKind kind, const LowerContext& ctx) {
    ScoreEvent ev;
    ev.kind = kind;
    ev.source = SourceLoc{ctx.section, ctx.voice, ctx.top_ordinal};
    return ev;
}

inline void lower_one(const CmmeEvent& event, std::vector<ScoreEvent>& out,
                      std::vector<VariantSite>* sites, LowerContext& ctx, bool* in_color_run,
                      int* open_lig, bool* multi_note_seen) {
    ConversionReport& rep = *ctx.report;
    if (const auto* n = event.as<CmmeNote>()) {
        if (multi_note_seen) {
            if (*multi_note_seen) {
                rep.warn("simultaneous note in MultiEvent dropped (" + n->pitch.str() + ")",
                         ctx.section, ctx.voice, ctx.top_ordinal);
                return;
            }
            *multi_note_seen = true;
        }
        ScoreEvent ev = base_event(EventKind::Note, ctx);
        ev.shape = n->shape;
        ev.pitch = n->pitch;
        ev.explicit_length = n->explicit_length;
        ev.syllable = n->syllable;
        if (n->signum) ev.markers |= marker::kSignum;
        if (n->corona) ev.markers |= marker::kCorona;
        // ligature run ids from the parser's Start/Mid/End flags
        if (n->ligature == LigatureFlag::Start) {
            *open_lig = ++*ctx.lig_counter;
            ev.ligature_form = n->ligature_form;
        }
        if (n->ligature != LigatureFlag::None) ev.ligature_id = *open_lig;
        if (n->ligature == LigatureFlag::End) *open_lig = 0;
        // coloration runs: consecutive colored notes share an id
        if (n->colored) {
            if (!*in_color_run) {
                ++*ctx.color_counter;
                *in_color_run = true;
            }
            ev.coloration_id = *ctx.color_counter;
        } else {
            *in_color_run = false;
        }
        out.push_back(std::move(ev));
        return;
    }
    if (const auto* r = event.as<CmmeRest>()) {
        if (multi_note_seen) {
            if (*multi_note_seen) {
                rep.warn("simultaneous rest in MultiEvent dropped", ctx.section, ctx.voice,
                         ctx.top_ordinal);
                return;
            }
            *multi_note_seen = true;
        }
        ScoreEvent ev = base_event(EventKind::Rest, ctx);
        ev.shape = r->shape;
        ev.explicit_length = r->explicit_length;
        *in_color_run = false;
        out.push_back(std::move(ev));
        return;
    }
    if (const auto* d = event.as<CmmeDot>()) {
        ScoreEvent ev = base_event(EventKind::Dot, ctx);
        ev.dot_kind = d->kind;
        out.push_back(std::move(ev));
        return;
    }
    if (const auto* c = event.as<CmmeClef>()) {
        ScoreEvent ev = base_event(EventKind::Clef, ctx);
        ev.clef = *c;
        out.push_back(std::move(ev));
        return;
    }
    if (const auto* m = event.as<CmmeMensuration>()) {
        ScoreEvent ev = base_event(EventKind::Mensur, ctx);
        ev.mensur = Mensuration::resolve(*m);
        out.push_back(std::move(ev));
        return;
    }
    if (const auto* p = event.as<CmmeProportion>()) {
        ScoreEvent ev = base_event(EventKind::Proport, ctx);
        ev.proport = Proportion{p->num, p->den, p->tempo_change};
        out.push_back(std::move(ev));
        return;
    }
    if (const auto* cc = event.as<CmmeColorChange>()) {
        rep.drop("color change (" + (cc->text.empty() ? std::string("?") : cc->text) + ")");
        return;
    }
    if (const auto* cu = event.as<CmmeCustos>()) {
        ScoreEvent ev = base_event(EventKind::Custos, ctx);
        ev.pitch = cu->pitch;
        out.push_back(std::move(ev));
        return;
    }
    if (const auto* ot = event.as<CmmeOriginalText>()) {
        ScoreEvent ev = base_event(EventKind::DirectiveSource, ctx);
        ev.text = ot->text;
        out.push_back(std::move(ev));
        return;
    }
    if (event.is<CmmeLineEnd>()) {
        return;  // layout only
    }
    if (const auto* el = event.as<CmmeEllipsis>()) {
        ScoreEvent ev = base_event(EventKind::Marker, ctx);
        ev.markers |= marker::kEllipsis;
        ev.explicit_length = el->extent;
        out.push_back(std::move(ev));
        return;
    }
    if (const auto* me = event.as<CmmeMultiEvent>()) {
        bool note_seen = false;
        for (const auto& sub : me->events) {
            if (sub.is<CmmeVariantGroup>()) {
                const auto* g = sub.as<CmmeVariantGroup>();
                rep.warn("variant group inside MultiEvent flattened to its default reading",
                         ctx.section, ctx.voice, ctx.top_ordinal);
                for (const auto& dev : g->default_events)
                    lower_one(dev, out, nullptr, ctx, in_color_run, open_lig, &note_seen);
                continue;
            }
            lower_one(sub, out, nullptr, ctx, in_color_run, open_lig, &note_seen);
        }
        return;
    }
    if (const auto* g = event.as<CmmeVariantGroup>()) {
        if (!sites) {
            rep.warn("nested variant group flattened to its default reading", ctx.section,
                     ctx.voice, ctx.top_ordinal);
            for (const auto& dev : g->default_events)
                lower_one(dev, out, nullptr, ctx, in_color_run, open_lig, multi_note_seen);
            return;
        }
        VariantSite site;
        site.voice = ctx.voice_index;
        site.position = out.size();
        site.default_sources = g->default_sources;
        size_t before = out.size();
        for (const auto& dev : g->default_events)
            lower_one(dev, out, nullptr, ctx, in_color_run, open_lig, nullptr);
        site.default_count = out.size() - before;
        for (const auto& r : g->readings) {
            VariantReadingIR rir;
            rir.source_refs = r.source_refs;
            rir.lacuna = r.lacuna;
            bool color_run = false;
            int lig = 0;
            LowerContext rctx = ctx;
            for (const auto& rev : r.events)
                lower_one(rev, rir.events, nullptr, rctx, &color_run, &lig, nullptr);
            site.readings.push_back(std::move(rir));
        }
        sites->push_back(std::move(site));
        return;
    }
    if (const auto* u = event.as<CmmeUnsupported>()) {
        rep.warn("skipping unsupported element <" + u->tag + ">", ctx.section, ctx.voice,
                 ctx.top_ordinal);
        return;
    }
}

inline void lower_events(const std::vector<CmmeEvent>& src, std::vector<ScoreEvent>& out,
                         std::vector<VariantSite>* sites, LowerContext& ctx) {
    bool in_color_run = false;
    int open_lig = 0;
    long ord = 0;
    for (const auto& event : src) {
        ctx.top_ordinal = ord++;
        lower_one(event, out, sites, ctx, &in_color_run, &open_lig, nullptr);
    }
    ctx.top_ordinal = -1;
}

}  // namespace detail

// Returns the reading whose sources contain the selector's id, else the
// default. Lacuna readings are selectable and may be empty.
inline const std::vector<ScoreEvent>& select_reading(const VariantSite& site,
                                                     const VariantSelector& sel) {
    if (sel.mode == VariantSelector::Mode::BySource) {
        for (const auto& r : site.readings) {
            for (const auto& ref : r.source_refs)
                if (ref == sel.source_id) return r.events;
        }
    }
    return site.default_events;
}

// Transforms a parsed document into ScoreIR. The main stream always carries
// the default readings; `sel` is validated here and applied by the CMN side.
inline ScoreIR build_score(const CmmeDocument& doc, const VariantSelector& sel,
                           ConversionReport& report) {
    bool any_mensural = false;
    for (const auto& s : doc.sections) any_mensural |= (s.kind == SectionKind::Mensural);
    if (!any_mensural)
        throw MensuraError(ErrorCode::EmptyScore, "document has no mensural section");

    if (sel.mode == VariantSelector::Mode::BySource && !doc.has_source(sel.source_id))
        report.warn("unknown source id '" + sel.source_id +
                    "'; falling back to default readings");

    ScoreIR ir;
    ir.title = doc.title;
    ir.composer = doc.composer;
    ir.editor = doc.editor;
    ir.source_ids = doc.source_ids;
    ir.voices.resize(doc.voices.size());
    for (size_t v = 0; v < doc.voices.size(); ++v) ir.voices[v].meta = doc.voices[v];

    std::vector<int> lig_counters(ir.voices.size(), 0);
    std::vector<int> color_counters(ir.voices.size(), 0);

    int doc_section = 0;
    for (const auto& sec : doc.sections) {
        ++doc_section;
        if (sec.kind != SectionKind::Mensural) {
            report.warn(std::string("skipping ") + section_kind_name(sec.kind) +
                            " section (not converted)",
                        doc_section);
            continue;
        }
        ++ir.num_sections;
        for (size_t v = 0; v < ir.voices.size(); ++v) {
            auto& events = ir.voices[v].events;
            ScoreEvent brk;
            brk.kind = EventKind::Marker;
            brk.markers = marker::kSectionBreak;
            brk.source = SourceLoc{doc_section, static_cast<int>(v) + 1, -1};
            events.push_back(brk);
            auto it = sec.voice_events.find(static_cast<int>(v) + 1);
            if (it != sec.voice_events.end()) {
                detail::LowerContext ctx;
                ctx.section = doc_section;
                ctx.voice = static_cast<int>(v) + 1;
                ctx.voice_index = static_cast<int>(v);
                ctx.lig_counter = &lig_counters[v];
                ctx.color_counter = &color_counters[v];
                ctx.report = &report;
                detail::lower_events(it->second, events, &ir.apparatus, ctx);
            }
        }
    }

    detail::thread_and_pad(ir.voices, report, &ir.apparatus);

    // Resolve apparatus readings from the state at each site.
    for (auto& site : ir.apparatus) {
        VoiceStream& vs = ir.voices[static_cast<size_t>(site.voice)];
        VoiceState st = detail::state_at(vs, site.position);
        site.onset = st.cursor;
        site.default_events.assign(
            vs.events.begin() + static_cast<std::ptrdiff_t>(site.position),
            vs.events.begin() + static_cast<std::ptrdiff_t>(site.position + site.default_count));
        for (auto& r : site.readings) {
            VoiceState rst = st;
            detail::thread_run(r.events, 0, r.events.size(), rst, report);
            r.total_sounding = rst.cursor - st.cursor;
        }
    }

    // Stable per-voice identities used by the CMN transform.
    for (auto& vs : ir.voices) {
        long uid = 0;
        for (auto& ev : vs.events) ev.uid = uid++;
    }
    return ir;
}

}  // namespace mensura
