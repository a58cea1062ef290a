#pragma once

// ScoreIR -> MeasuredScore: resolve editorial markup, infer meters from the
// mensur signs, normalize clefs, bar each voice with tie splitting capped at
// the breve, convert proportions to tuplets (adjusting ratios where a note
// is cut by a barline), and attach span brackets and mensur directives.

#include <mensura/errors.hpp>
#include <mensura/report.hpp>
#include <mensura/score_model.hpp>

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mensura {

// ---------------------------------------------------------------------------
// Meters

struct MeterSig {
    int count = 4;
    int unit = 2;  // always half-note denominators here

    Rational capacity() const { return Rational(count); }  // minima per bar
    bool operator==(const MeterSig&) const = default;
    std::string str() const { return std::to_string(count) + "/" + std::to_string(unit); }
};

struct MeterMap {
    std::vector<std::pair<Rational, MeterSig>> entries;  // onset (minima) -> meter

    const MeterSig& at(const Rational& t) const {
        size_t best = 0;
        for (size_t i = 0; i < entries.size(); ++i)
            if (entries[i].first <= t) best = i;
        return entries[best].second;
    }
};

// prolatio major bars at the semibrevis (3 minimae); otherwise the brevis
// spans the bar: 4 minimae under imperfect tempus, 6 under perfect.
inline MeterSig mensur_to_meter(const Mensuration& m) {
    if (m.prolatio == Prolatio::Major) return MeterSig{3, 2};
    if (m.tempus == Tempus::Perfect) return MeterSig{6, 2};
    return MeterSig{4, 2};
}

inline std::string mensur_directive(const Mensuration& m) { return m.sign_text; }

// Initial entry from the top voice; later entries only where every voice
// carries a sign, the top voice's mapped meter differs, and the change lands
// on a bar boundary of the current meter.
inline MeterMap infer_meter_map(const ScoreIR& ir, ConversionReport& report) {
    MeterMap mm;
    std::vector<std::map<Rational, Mensuration>> signs(ir.voices.size());
    for (size_t v = 0; v < ir.voices.size(); ++v)
        for (const auto& ev : ir.voices[v].events)
            if (ev.kind == EventKind::Mensur) signs[v][ev.onset] = *ev.mensur;  // last one wins

    Mensuration initial;  // sign "C" fallback
    if (!signs.empty() && !signs[0].empty()) {
        initial = signs[0].begin()->second;
    } else {
        report.warn("top voice has no mensuration; assuming C (4/2)", -1, 1);
    }
    mm.entries.emplace_back(Rational(0), mensur_to_meter(initial));

    std::set<Rational> onsets;
    for (const auto& m : signs)
        for (const auto& [t, _] : m)
            if (t > Rational(0)) onsets.insert(t);

    Rational cur_onset(0);
    MeterSig cur = mm.entries[0].second;
    for (const Rational& t : onsets) {
        size_t carrying = 0;
        for (const auto& m : signs) carrying += m.count(t) ? 1 : 0;
        if (carrying < signs.size()) {
            const Mensuration* any = nullptr;
            for (const auto& m : signs)
                if (auto it = m.find(t); it != m.end()) any = &it->second;
            if (any && !(mensur_to_meter(*any) == cur))
                report.warn("mensuration at " + t.str() +
                            " minima not carried by all voices; meter unchanged");
            continue;
        }
        MeterSig next = mensur_to_meter(signs[0].at(t));
        if (next == cur) continue;
        Rational bars = (t - cur_onset) / cur.capacity();
        if (!bars.is_integer()) {
            report.warn("meter change at " + t.str() +
                        " minima is not on a bar boundary; skipped");
            continue;
        }
        mm.entries.emplace_back(t, next);
        cur_onset = t;
        cur = next;
    }
    return mm;
}

// ---------------------------------------------------------------------------
// Clefs

enum class ClefChoice { G2, G2OttavaBassa, F4 };

inline const char* clef_choice_name(ClefChoice c) {
    switch (c) {
        case ClefChoice::G2: return "G2";
        case ClefChoice::G2OttavaBassa: return "G2 ottava bassa";
        case ClefChoice::F4: return "F4";
    }
    return "?";
}

// Median sounding pitch decides the band, ties toward the higher clef:
// middle C (C4) and above -> G2, down to F3 -> G2 ottava bassa, below -> F4.
inline ClefChoice normalize_clef(const VoiceStream& vs, ConversionReport& report) {
    std::vector<int> keys;
    for (const auto& ev : vs.events)
        if (ev.kind == EventKind::Note && ev.pitch) keys.push_back(ev.pitch->chromatic());
    if (keys.empty()) {
        report.warn("voice has no pitched notes; defaulting to G2", -1, vs.meta.index);
        return ClefChoice::G2;
    }
    std::sort(keys.begin(), keys.end());
    int median = keys[keys.size() / 2];  // upper median
    constexpr int kMiddleC = 60;         // C4
    constexpr int kLowF = 53;            // F3
    if (median >= kMiddleC) return ClefChoice::G2;
    if (median >= kLowF) return ClefChoice::G2OttavaBassa;
    return ClefChoice::F4;
}

// ---------------------------------------------------------------------------
// Editorial flattening

// Resolves the apparatus via select_reading, splices the chosen readings
// into the main streams, and re-threads. The result has an empty apparatus.
inline ScoreIR flatten_editorial(const ScoreIR& ir, const VariantSelector& sel,
                                 ConversionReport& report) {
    ScoreIR out = ir;
    // splice right to left so stored positions stay valid
    std::vector<const VariantSite*> order;
    for (const auto& s : out.apparatus) order.push_back(&s);
    std::sort(order.begin(), order.end(), [](const VariantSite* a, const VariantSite* b) {
        if (a->voice != b->voice) return a->voice > b->voice;
        return a->position > b->position;
    });
    for (const VariantSite* site : order) {
        const std::vector<ScoreEvent>& chosen = select_reading(*site, sel);
        auto& events = out.voices[static_cast<size_t>(site->voice)].events;
        auto begin = events.begin() + static_cast<std::ptrdiff_t>(site->position);
        events.erase(begin, begin + static_cast<std::ptrdiff_t>(site->default_count));
        events.insert(events.begin() + static_cast<std::ptrdiff_t>(site->position),
                      chosen.begin(), chosen.end());
    }
    out.apparatus.clear();
    // strip synthetic pads, re-thread in lockstep, re-pad
    for (auto& vs : out.voices)
        std::erase_if(vs.events, [](const ScoreEvent& ev) { return ev.is_space; });
    detail::thread_and_pad(out.voices, report, nullptr);
    for (auto& vs : out.voices) {
        long uid = 0;
        for (auto& ev : vs.events) ev.uid = uid++;
    }
    return out;
}

// ---------------------------------------------------------------------------
// CMN durations

enum class CmnDur { Breve, Whole, Half, Quarter, Eighth, Sixteenth };

inline Rational cmn_dur_span(CmnDur d) {
    switch (d) {
        case CmnDur::Breve: return Rational(4);
        case CmnDur::Whole: return Rational(2);
        case CmnDur::Half: return Rational(1);
        case CmnDur::Quarter: return Rational(1, 2);
        case CmnDur::Eighth: return Rational(1, 4);
        case CmnDur::Sixteenth: return Rational(1, 8);
    }
    return Rational(1);
}

inline const char* cmn_dur_mei(CmnDur d) {
    switch (d) {
        case CmnDur::Breve: return "breve";
        case CmnDur::Whole: return "1";
        case CmnDur::Half: return "2";
        case CmnDur::Quarter: return "4";
        case CmnDur::Eighth: return "8";
        case CmnDur::Sixteenth: return "16";
    }
    return "?";
}

inline Rational dot_factor(int dots) {
    switch (dots) {
        case 1: return Rational(3, 2);
        case 2: return Rational(7, 4);
        default: return Rational(1);
    }
}

namespace detail {

struct CmnSymbol {
    CmnDur dur;
    int dots;
    Rational span;
};

// All notatable symbols, descending by span. The breve is the longest value
// emitted and takes no dots (a dotted breve would exceed it).
inline const std::vector<CmnSymbol>& cmn_symbols() {
    static const std::vector<CmnSymbol> syms = [] {
        std::vector<CmnSymbol> v;
        v.push_back({CmnDur::Breve, 0, Rational(4)});
        for (CmnDur d : {CmnDur::Whole, CmnDur::Half, CmnDur::Quarter, CmnDur::Eighth,
                         CmnDur::Sixteenth})
            for (int dots = 2; dots >= 0; --dots)
                v.push_back({d, dots, cmn_dur_span(d) * dot_factor(dots)});
        std::sort(v.begin(), v.end(),
                  [](const CmnSymbol& a, const CmnSymbol& b) { return a.span > b.span; });
        return v;
    }();
    return syms;
}

inline bool decompose_search(const Rational& rem, const Rational& max_span, int left,
                             std::vector<std::pair<CmnDur, int>>& chain) {
    if (rem.is_zero()) return true;
    if (left == 0) return false;
    for (const CmnSymbol& sym : cmn_symbols()) {
        if (sym.span > max_span || sym.span > rem) continue;
        if (sym.span * Rational(left) < rem) return false;  // even `left` copies fall short
        chain.emplace_back(sym.dur, sym.dots);
        if (decompose_search(rem - sym.span, sym.span, left - 1, chain)) return true;
        chain.pop_back();
    }
    return false;
}

}  // namespace detail

// Exact decomposition of a span (half-note units) into a tie chain of
// notatable values: fewest symbols, longest value first. Throws
// Unrepresentable when no finite chain exists (a converter defect upstream).
inline std::vector<std::pair<CmnDur, int>> decompose_duration(const Rational& d) {
    if (d <= Rational(0))
        throw MensuraError(ErrorCode::Unrepresentable, "non-positive duration " + d.str());
    if (32 % d.den() != 0)
        throw MensuraError(ErrorCode::Unrepresentable,
                           "duration " + d.str() + " is not a sum of notatable values");
    Rational depth_bound = d / Rational(1, 8);
    int max_depth = static_cast<int>(depth_bound.num() / depth_bound.den()) + 1;
    max_depth = std::min(max_depth, 64);
    std::vector<std::pair<CmnDur, int>> chain;
    for (int depth = 1; depth <= max_depth; ++depth) {
        chain.clear();
        if (detail::decompose_search(d, Rational(4), depth, chain)) return chain;
    }
    throw MensuraError(ErrorCode::Unrepresentable,
                       "duration " + d.str() + " is not a sum of notatable values");
}

// ---------------------------------------------------------------------------
// Measures

enum class TieFlag { None, Start, Mid, End };

struct CmnNote {
    bool rest = false;
    bool space = false;
    Pitch pitch;
    CmnDur dur = CmnDur::Half;
    int dots = 0;
    TieFlag tie = TieFlag::None;
    int tuplet = 0;             // tuplet id, 0 = none
    Rational onset;             // measure-relative, half-note units
    Rational raw_span;          // occupied span (tuplet-adjusted), half units
    long long prop_num = 1;     // active proportion ratio
    long long prop_den = 1;
    bool cut_part = false;      // fragment of a note split by a barline
    bool needs_ratio = false;   // placeholder awaiting an adjusted tuplet
    long part_key = -1;         // unique per (source event, part)
    long uid = -1;              // source event identity within the voice
    bool fermata = false;
    bool signum = false;
    std::string syllable;
    int serial = -1;            // voice-wide numbering, set late

    Rational notated() const { return cmn_dur_span(dur) * dot_factor(dots); }
};

struct TupletSpec {
    int id = 0;
    long long num = 1;
    long long numbase = 1;
    size_t first = 0;  // note index range within the measure, inclusive
    size_t last = 0;
};

struct Measure {
    Rational start;    // minima == half-note units from piece start
    MeterSig meter;
    std::vector<CmnNote> notes;
    std::vector<TupletSpec> tuplets;
};

struct SpanMarker {
    enum class Kind { Ligature, Coloration };
    Kind kind = Kind::Ligature;
    int voice = 0;         // 0-based
    int first_serial = -1;
    int last_serial = -1;
};

struct Directive {
    int voice = 0;         // 0-based
    Rational onset;
    std::string text;
    int anchor_serial = -1;
};

struct VoiceRender {
    CmmeVoiceMeta meta;
    ClefChoice clef = ClefChoice::G2;
    std::string keysig;    // "1f" when the voice opens with a flat signature
    std::vector<Measure> measures;
};

struct MeasuredScore {
    std::string title;
    std::string composer;
    std::string editor;
    MeterMap meter_map;
    std::vector<VoiceRender> voices;
    std::vector<SpanMarker> spans;
    std::vector<Directive> directives;
};

namespace detail {

struct BarGrid {
    struct Bar {
        Rational start;
        Rational end;  // start + capacity; content may stop earlier in the last bar
        MeterSig meter;
    };
    std::vector<Bar> bars;

    static BarGrid build(const MeterMap& mm, const Rational& total) {
        BarGrid g;
        for (size_t i = 0; i < mm.entries.size(); ++i) {
            Rational at = mm.entries[i].first;
            MeterSig meter = mm.entries[i].second;
            Rational until = (i + 1 < mm.entries.size()) ? mm.entries[i + 1].first : total;
            Rational cap = meter.capacity();
            while (at < until || (i + 1 == mm.entries.size() && at < total)) {
                g.bars.push_back(Bar{at, at + cap, meter});
                at += cap;
            }
        }
        if (g.bars.empty() && !mm.entries.empty())
            g.bars.push_back(Bar{Rational(0), mm.entries[0].second.capacity(),
                                 mm.entries[0].second});
        return g;
    }

    size_t index_at(const Rational& t) const {
        for (size_t i = 0; i < bars.size(); ++i)
            if (t >= bars[i].start && t < bars[i].end) return i;
        return bars.empty() ? 0 : bars.size() - 1;
    }
};

}  // namespace detail

// Cuts every durational event at the bar boundaries implied by the meter
// map. A note overlapping a boundary splits into tied parts; rests split
// without ties. Parts under a proportion keep their notated value scaled by
// the run's ratio where that is notatable; anything else is left as a
// placeholder for proportions_to_tuplets to solve.
inline std::vector<Measure> bar_voice(const VoiceStream& vs, const MeterMap& mm,
                                      ConversionReport& report) {
    detail::BarGrid grid = detail::BarGrid::build(mm, vs.total_span());
    std::vector<Measure> measures;
    measures.reserve(grid.bars.size());
    for (const auto& b : grid.bars) measures.push_back(Measure{b.start, b.meter, {}, {}});

    long part_key = 0;
    for (const auto& ev : vs.events) {
        if (!ev.durational()) continue;
        bool as_rest = ev.kind == EventKind::Rest;
        bool as_space = ev.is_space || ev.kind == EventKind::Marker;

        // cut [onset, onset+sounding) at the bar boundaries
        struct Part {
            size_t bar;
            Rational at;
            Rational span;
        };
        std::vector<Part> parts;
        Rational t = ev.onset;
        Rational rem = ev.sounding;
        while (rem > Rational(0)) {
            size_t bi = grid.index_at(t);
            Rational take = std::min(rem, grid.bars[bi].end - t);
            parts.push_back(Part{bi, t, take});
            t += take;
            rem -= take;
        }
        bool cut = parts.size() > 1;

        bool first_part = true;
        for (const Part& p : parts) {
            Rational preferred = p.span * Rational(ev.prop_num, ev.prop_den);
            std::vector<std::pair<CmnDur, int>> chain;
            bool notatable = true;
            try {
                chain = decompose_duration(preferred);
            } catch (const MensuraError&) {
                notatable = false;
            }

            CmnNote proto;
            proto.rest = as_rest || as_space;
            proto.space = as_space;
            if (ev.pitch) proto.pitch = *ev.pitch;
            proto.prop_num = ev.prop_num;
            proto.prop_den = ev.prop_den;
            proto.cut_part = cut;
            proto.part_key = part_key;
            proto.uid = ev.uid;

            Measure& m = measures[p.bar];
            if (!notatable) {
                proto.needs_ratio = true;
                proto.raw_span = p.span;
                proto.onset = p.at - m.start;
                if (first_part) {
                    proto.fermata = ev.has_marker(marker::kCorona);
                    proto.signum = ev.has_marker(marker::kSignum);
                    proto.syllable = ev.syllable;
                }
                m.notes.push_back(proto);
            } else {
                Rational local = p.at - m.start;
                bool first_sym = true;
                for (const auto& [dur, dots] : chain) {
                    CmnNote n = proto;
                    n.dur = dur;
                    n.dots = dots;
                    n.onset = local;
                    n.raw_span = n.notated() * Rational(ev.prop_den, ev.prop_num);
                    if (first_part && first_sym) {
                        n.fermata = ev.has_marker(marker::kCorona);
                        n.signum = ev.has_marker(marker::kSignum);
                        n.syllable = ev.syllable;
                    }
                    local += n.raw_span;
                    m.notes.push_back(std::move(n));
                    first_sym = false;
                }
            }
            ++part_key;
            first_part = false;
        }
    }
    (void)report;
    return measures;
}

namespace detail {

// Round to the nearest eighth of a half note (ties round up), floor 1/8.
inline Rational nearest_eighth(const Rational& q) {
    Rational scaled = q * Rational(8) + Rational(1, 2);
    long long k = scaled.num() / scaled.den();  // floor for positive values
    if (k < 1) k = 1;
    return Rational(k, 8);
}

}  // namespace detail

// Groups proportioned notes into tuplets: one tuplet per maximal uncut run
// with the proportion's own ratio; each barline-cut part gets its own
// tuplet, re-solved when its proportional share is not notatable. Returns
// the number of tuplets created.
inline long proportions_to_tuplets(std::vector<Measure>& measures, ConversionReport& report,
                                   int* tuplet_id_counter = nullptr) {
    int local_counter = 0;
    int& id = tuplet_id_counter ? *tuplet_id_counter : local_counter;
    long created = 0;

    for (auto& m : measures) {
        // Solve placeholders: pick a nearby notatable value and a ratio that
        // scales it onto the part's real span exactly.
        for (size_t i = 0; i < m.notes.size();) {
            CmnNote& n = m.notes[i];
            if (!n.needs_ratio) {
                ++i;
                continue;
            }
            Rational span = n.raw_span;
            Rational preferred = span * Rational(n.prop_num, n.prop_den);
            Rational notate = detail::nearest_eighth(preferred);
            Rational ratio = notate / span;  // num/numbase
            if (ratio.num() > 4096 || ratio.den() > 4096)
                report.error("unrepresentable tuplet: span " + span.str() + " needs ratio " +
                             std::to_string(ratio.num()) + "/" + std::to_string(ratio.den()) +
                             "; emitted as written");
            std::vector<std::pair<CmnDur, int>> chain = decompose_duration(notate);
            CmnNote proto = n;
            proto.needs_ratio = false;
            proto.prop_num = ratio.num();
            proto.prop_den = ratio.den();
            proto.cut_part = true;  // always its own tuplet
            std::vector<CmnNote> replacement;
            Rational local = n.onset;
            bool first = true;
            for (const auto& [dur, dots] : chain) {
                CmnNote part = proto;
                part.dur = dur;
                part.dots = dots;
                part.onset = local;
                part.raw_span = part.notated() * Rational(ratio.den(), ratio.num());
                if (!first) {
                    part.fermata = false;
                    part.signum = false;
                    part.syllable.clear();
                }
                local += part.raw_span;
                replacement.push_back(std::move(part));
                first = false;
            }
            m.notes.erase(m.notes.begin() + static_cast<std::ptrdiff_t>(i));
            m.notes.insert(m.notes.begin() + static_cast<std::ptrdiff_t>(i),
                           replacement.begin(), replacement.end());
            i += replacement.size();
        }

        // Group into tuplets.
        size_t i = 0;
        while (i < m.notes.size()) {
            CmnNote& n = m.notes[i];
            bool proportioned = !(n.prop_num == n.prop_den);
            if (!proportioned) {
                ++i;
                continue;
            }
            size_t j = i + 1;
            if (n.cut_part) {
                while (j < m.notes.size() && m.notes[j].part_key == n.part_key) ++j;
            } else {
                while (j < m.notes.size() && !m.notes[j].cut_part &&
                       m.notes[j].prop_num == n.prop_num && m.notes[j].prop_den == n.prop_den)
                    ++j;
            }
            TupletSpec spec;
            spec.id = ++id;
            spec.num = n.prop_num;
            spec.numbase = n.prop_den;
            spec.first = i;
            spec.last = j - 1;
            for (size_t k = i; k < j; ++k) m.notes[k].tuplet = spec.id;
            m.tuplets.push_back(spec);
            ++created;
            i = j;
        }
    }
    return created;
}

// Bracket markers over the first..last CMN note of each ligature and
// coloration span, tie continuations included.
inline std::vector<SpanMarker> attach_spans(const VoiceStream& vs,
                                            const std::vector<Measure>& measures, int voice) {
    std::map<int, std::pair<int, int>> lig;    // span id -> first/last serial
    std::map<int, std::pair<int, int>> color;
    std::map<long, std::pair<int, int>> by_uid;  // uid -> serial range
    for (const auto& m : measures) {
        for (const auto& n : m.notes) {
            auto it = by_uid.find(n.uid);
            if (it == by_uid.end()) by_uid[n.uid] = {n.serial, n.serial};
            else it->second.second = n.serial;
        }
    }
    auto widen = [](std::pair<int, int>& range, const std::pair<int, int>& r) {
        if (range.first < 0 || r.first < range.first) range.first = r.first;
        if (r.second > range.second) range.second = r.second;
    };
    for (const auto& ev : vs.events) {
        if (ev.kind != EventKind::Note && ev.kind != EventKind::Rest) continue;
        auto it = by_uid.find(ev.uid);
        if (it == by_uid.end()) continue;
        if (ev.ligature_id > 0) {
            auto& range = lig.try_emplace(ev.ligature_id, std::make_pair(-1, -1)).first->second;
            widen(range, it->second);
        }
        if (ev.coloration_id > 0) {
            auto& range = color.try_emplace(ev.coloration_id, std::make_pair(-1, -1)).first->second;
            widen(range, it->second);
        }
    }
    std::vector<SpanMarker> out;
    for (const auto& [_, range] : lig)
        out.push_back(SpanMarker{SpanMarker::Kind::Ligature, voice, range.first, range.second});
    for (const auto& [_, range] : color)
        out.push_back(SpanMarker{SpanMarker::Kind::Coloration, voice, range.first, range.second});
    return out;
}

// Full CMN pipeline over a flattened ScoreIR.
inline MeasuredScore to_measured_score(const ScoreIR& ir, ConversionReport& report) {
    if (!ir.apparatus.empty())
        throw MensuraError(ErrorCode::SerializationFailure,
                           "apparatus must be flattened before the CMN transform");
    MeasuredScore ms;
    ms.title = ir.title;
    ms.composer = ir.composer;
    ms.editor = ir.editor;
    ms.meter_map = infer_meter_map(ir, report);

    for (size_t v = 0; v < ir.voices.size(); ++v) {
        const VoiceStream& vs = ir.voices[v];
        VoiceRender vr;
        vr.meta = vs.meta;
        vr.clef = normalize_clef(vs, report);

        // dropped mensural furniture, logged once per occurrence
        for (const auto& ev : vs.events) {
            switch (ev.kind) {
                case EventKind::Custos:
                    report.drop("custos (voice " + std::to_string(v + 1) + ")");
                    break;
                case EventKind::DirectiveSource:
                    report.drop("original text phrase (voice " + std::to_string(v + 1) + ")");
                    break;
                case EventKind::Clef:
                    if (ev.clef && ev.clef->is_signature) {
                        if (ev.onset.is_zero() && ev.clef->pitch &&
                            ev.clef->pitch->step == 'B') {
                            vr.keysig = "1f";
                        } else {
                            report.drop("signature accidental at " + ev.onset.str() +
                                        " minima (voice " + std::to_string(v + 1) + ")");
                        }
                    } else if (!ev.onset.is_zero()) {
                        report.drop("mid-piece clef change (voice " + std::to_string(v + 1) +
                                    ")");
                    }
                    break;
                case EventKind::Marker:
                    if (ev.has_marker(marker::kEllipsis) && ev.sounding.is_zero())
                        report.drop("ellipsis gap without extent (voice " +
                                    std::to_string(v + 1) + ")");
                    break;
                case EventKind::Note:
                    if (ev.has_marker(marker::kSignum))
                        report.warn("signum congruentiae rendered as fermata", ev.source.section,
                                    ev.source.voice, ev.source.ordinal);
                    break;
                default:
                    break;
            }
        }

        vr.measures = bar_voice(vs, ms.meter_map, report);
        int tuplet_ids = 0;
        report.counts.tuplets += proportions_to_tuplets(vr.measures, report, &tuplet_ids);

        // ties across the split parts of each source note
        CmnNote* prev = nullptr;
        for (auto& m : vr.measures) {
            for (auto& n : m.notes) {
                if (prev && !prev->rest && !n.rest && prev->uid == n.uid) {
                    prev->tie = (prev->tie == TieFlag::None) ? TieFlag::Start : TieFlag::Mid;
                    n.tie = TieFlag::End;
                    ++report.counts.ties;
                }
                prev = &n;
            }
        }

        // voice-wide serials for spans, ties and directives
        int serial = 0;
        for (auto& m : vr.measures)
            for (auto& n : m.notes) n.serial = serial++;

        for (auto& sm : attach_spans(vs, vr.measures, static_cast<int>(v)))
            ms.spans.push_back(sm);

        // one directive per mensur sign, anchored to the next note
        std::vector<std::pair<long, int>> note_uids;  // (uid, serial) in order
        for (const auto& m : vr.measures)
            for (const auto& n : m.notes) note_uids.emplace_back(n.uid, n.serial);
        for (const auto& ev : vs.events) {
            if (ev.kind != EventKind::Mensur) continue;
            Directive dir;
            dir.voice = static_cast<int>(v);
            dir.onset = ev.onset;
            dir.text = mensur_directive(*ev.mensur);
            for (const auto& [uid, s] : note_uids) {
                if (uid > ev.uid) {
                    dir.anchor_serial = s;
                    break;
                }
            }
            if (dir.anchor_serial < 0 && !note_uids.empty())
                dir.anchor_serial = note_uids.back().second;
            if (dir.anchor_serial >= 0) ms.directives.push_back(std::move(dir));
            else report.warn("mensur directive dropped: voice has no notes", -1,
                             static_cast<int>(v) + 1);
        }

        for (const auto& m : vr.measures)
            for (const auto& n : m.notes)
                if (!n.rest) ++report.counts.notes;
        ms.voices.push_back(std::move(vr));
    }

    report.counts.measures +=
        ms.voices.empty() ? 0 : static_cast<long>(ms.voices[0].measures.size());
    return ms;
}

}  // namespace mensura
