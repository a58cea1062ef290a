#pragma once

// Typed model of the CMME-XML subset this converter reads. Event lists keep
// source order; anything outside the subset is preserved as CmmeUnsupported
// so nothing is discarded silently.

#include <mensura/rational.hpp>
#include <mensura/report.hpp>

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mensura {

enum class NoteShape {
    Maxima, Longa, Brevis, Semibrevis, Minima, Semiminima, Fusa, Semifusa
};

inline const char* note_shape_name(NoteShape s) {
    switch (s) {
        case NoteShape::Maxima: return "Maxima";
        case NoteShape::Longa: return "Longa";
        case NoteShape::Brevis: return "Brevis";
        case NoteShape::Semibrevis: return "Semibrevis";
        case NoteShape::Minima: return "Minima";
        case NoteShape::Semiminima: return "Semiminima";
        case NoteShape::Fusa: return "Fusa";
        case NoteShape::Semifusa: return "Semifusa";
    }
    return "?";
}

enum class AccidentalKind { Flat, Natural, Sharp };

// step 'A'..'G'; octave numbered so that middle C is C4 (the CMME OctaveNum
// convention is carried through unchanged).
struct Pitch {
    char step = 'C';
    int octave = 4;
    std::optional<AccidentalKind> accidental;

    bool operator==(const Pitch&) const = default;

    // MIDI-style chromatic index, used for clef band decisions.
    int chromatic() const {
        static constexpr int semis[7] = {9, 11, 0, 2, 4, 5, 7};  // A..G
        int base = (octave + 1) * 12 + semis[step - 'A'];
        if (accidental == AccidentalKind::Flat) --base;
        if (accidental == AccidentalKind::Sharp) ++base;
        return base;
    }

    std::string str() const {
        std::string s(1, step);
        if (accidental == AccidentalKind::Flat) s += 'b';
        if (accidental == AccidentalKind::Sharp) s += '#';
        s += std::to_string(octave);
        return s;
    }
};

enum class LigatureFlag { None, Start, Mid, End };
enum class DotKind { Addition, Division };

namespace detail {

inline std::string pname(const Pitch& p) {
    return std::string(1, static_cast<char>(p.step - 'A' + 'a'));
}

inline const char* accid_code(AccidentalKind a) {
    switch (a) {
        case AccidentalKind::Flat: return "f";
        case AccidentalKind::Natural: return "n";
        case AccidentalKind::Sharp: return "s";
    }
    return "n";
}

}  // namespace detail

struct CmmeEvent;  // recursive via MultiEventGroup / VariantGroup

struct CmmeNote {
    NoteShape shape = NoteShape::Semibrevis;
    Pitch pitch;
    std::optional<Rational> explicit_length;   // minima, pre-proportion
    LigatureFlag ligature = LigatureFlag::None;
    std::string ligature_form;                 // "Recta" / "Obliqua", opaque
    bool colored = false;
    bool corona = false;
    bool signum = false;
    std::string stem;                          // opaque stem/flag details
    std::string syllable;
    bool operator==(const CmmeNote&) const = default;
};

struct CmmeRest {
    NoteShape shape = NoteShape::Brevis;
    std::optional<Rational> explicit_length;
    bool operator==(const CmmeRest&) const = default;
};

struct CmmeDot {
    DotKind kind = DotKind::Addition;
    bool operator==(const CmmeDot&) const = default;
};

struct CmmeClef {
    std::string appearance;       // "C", "F", "G", "Bmol", ...
    int staff_loc = 1;            // 1 = bottom line, 2 = first space, ...
    int displacement = 0;
    bool is_signature = false;    // signature accidental written clef-like
    std::optional<Pitch> pitch;   // the pitch the clef marks
    bool operator==(const CmmeClef&) const = default;
};

struct CmmeMensuration {
    std::optional<char> sign;     // 'O' or 'C'
    bool dot = false;
    int strokes = 0;              // >0 means cut
    std::optional<int> number;
    std::optional<int> tempus;    // explicit MensInfo override: 2 or 3
    std::optional<int> prolatio;
    bool operator==(const CmmeMensuration&) const = default;
};

struct CmmeProportion {
    long long num = 1;
    long long den = 1;
    bool tempo_change = false;
    bool operator==(const CmmeProportion&) const = default;
};

struct CmmeColorChange {
    std::string text;
    bool operator==(const CmmeColorChange&) const = default;
};

struct CmmeCustos {
    Pitch pitch;
    bool operator==(const CmmeCustos&) const = default;
};

struct CmmeOriginalText {
    std::string text;
    bool operator==(const CmmeOriginalText&) const = default;
};

struct CmmeLineEnd {
    bool page_end = false;
    bool operator==(const CmmeLineEnd&) const = default;
};

struct CmmeEllipsis {
    std::optional<Rational> extent;   // minima, when the gap's span is known
    bool operator==(const CmmeEllipsis&) const = default;
};

struct CmmeMultiEvent {
    std::vector<CmmeEvent> events;
    bool operator==(const CmmeMultiEvent&) const = default;
};

struct CmmeReading {
    std::vector<std::string> source_refs;   // VariantVersion ids
    std::vector<CmmeEvent> events;
    bool lacuna = false;
    bool operator==(const CmmeReading&) const = default;
};

struct CmmeVariantGroup {
    std::vector<std::string> default_sources;
    std::vector<CmmeEvent> default_events;
    std::vector<CmmeReading> readings;      // non-default readings
    bool operator==(const CmmeVariantGroup&) const = default;
};

struct CmmeUnsupported {
    std::string tag;
    std::string raw;
    bool operator==(const CmmeUnsupported&) const = default;
};

struct CmmeEvent {
    using Variant = std::variant<CmmeNote, CmmeRest, CmmeDot, CmmeClef, CmmeMensuration,
                                 CmmeProportion, CmmeColorChange, CmmeCustos,
                                 CmmeOriginalText, CmmeLineEnd, CmmeEllipsis,
                                 CmmeMultiEvent, CmmeVariantGroup, CmmeUnsupported>;
    Variant v;

    CmmeEvent() : v(CmmeUnsupported{}) {}
    template <class T, std::enable_if_t<!std::is_same_v<std::decay_t<T>, CmmeEvent>, int> = 0>
    CmmeEvent(T&& value) : v(std::forward<T>(value)) {}

    bool operator==(const CmmeEvent&) const = default;

    template <class T> const T* as() const { return std::get_if<T>(&v); }
    template <class T> T* as() { return std::get_if<T>(&v); }
    template <class T> bool is() const { return std::holds_alternative<T>(v); }
};

struct CmmeVoiceMeta {
    int index = 1;          // 1-based, consecutive; 1 = top voice
    std::string name;
    bool editorial = false;
    bool operator==(const CmmeVoiceMeta&) const = default;
};

enum class SectionKind { Mensural, Plainchant, TextOnly };

inline const char* section_kind_name(SectionKind k) {
    switch (k) {
        case SectionKind::Mensural: return "mensural";
        case SectionKind::Plainchant: return "plainchant";
        case SectionKind::TextOnly: return "text-only";
    }
    return "?";
}

struct CmmeSection {
    SectionKind kind = SectionKind::Mensural;
    std::map<int, std::vector<CmmeEvent>> voice_events;  // voice index -> events
    bool operator==(const CmmeSection&) const = default;
};

struct CmmeDocument {
    std::string title;
    std::string composer;
    std::string editor;
    std::vector<std::pair<std::string, std::string>> source_ids;  // (id, name)
    std::vector<CmmeVoiceMeta> voices;
    std::vector<CmmeSection> sections;
    // Warnings raised during parsing that are not reconstructible from the
    // model alone (unknown attributes, count mismatches, repaired ligatures).
    std::vector<Warning> parse_warnings;

    bool operator==(const CmmeDocument&) const = default;

    bool has_source(const std::string& id) const {
        for (const auto& [sid, _] : source_ids)
            if (sid == id) return true;
        return false;
    }
};

}  // namespace mensura
