#pragma once

// End-to-end conversion: CMME-XML bytes -> MEI mensural or MEI CMN, plus
// batch helpers. Per-file conversion is pure, so batch output is identical
// to single-file output byte for byte.

#include <mensura/cmme_parser.hpp>
#include <mensura/cmn_transform.hpp>
#include <mensura/errors.hpp>
#include <mensura/mei_cmn_writer.hpp>
#include <mensura/mei_mensural_writer.hpp>
#include <mensura/report.hpp>
#include <mensura/score_model.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace mensura {

enum class Target { Mensural, Cmn };

struct ConvertOptions {
    Target target = Target::Cmn;
    bool mei_basic = false;
    VariantSelector reading;
    std::string id_prefix = "m";
    bool include_apparatus = true;
};

struct ConvertResult {
    std::string xml;   // empty when the conversion failed
    ConversionReport report;
    bool ok = false;
};

namespace detail {

inline long count_events(const CmmeDocument& doc) {
    long n = 0;
    for (const auto& sec : doc.sections)
        for (const auto& [_, events] : sec.voice_events) n += static_cast<long>(events.size());
    return n;
}

}  // namespace detail

inline ConvertResult convert_bytes(std::string_view bytes, const ConvertOptions& opts,
                                   const std::string& display_name) {
    ConvertResult result;
    result.report.file = display_name;
    auto started = std::chrono::steady_clock::now();
    try {
        CmmeDocument doc = parse_document(bytes);
        result.report.warnings.insert(result.report.warnings.end(), doc.parse_warnings.begin(),
                                      doc.parse_warnings.end());
        result.report.counts.events = detail::count_events(doc);

        ScoreIR ir = build_score(doc, opts.reading, result.report);

        XmlNode out;
        if (opts.target == Target::Mensural) {
            MensuralWriteOptions mo;
            mo.include_apparatus = opts.include_apparatus;
            mo.id_prefix = opts.id_prefix;
            out = write_mensural(ir, mo, result.report);
            for (const auto& vs : ir.voices)
                for (const auto& ev : vs.events)
                    if (ev.kind == EventKind::Note && !ev.is_space) ++result.report.counts.notes;
        } else {
            ScoreIR flat = flatten_editorial(ir, opts.reading, result.report);
            MeasuredScore ms = to_measured_score(flat, result.report);
            CmnWriteOptions co;
            co.mei_basic = opts.mei_basic;
            co.id_prefix = opts.id_prefix;
            out = write_cmn(ms, co, result.report);
        }
        result.xml = serialize_xml(out);
        result.ok = true;
    } catch (const MensuraError& e) {
        result.report.error(e.what());
    } catch (const std::exception& e) {
        result.report.error(std::string("internal: ") + e.what());
    }
    auto elapsed = std::chrono::steady_clock::now() - started;
    result.report.elapsed_ms =
        std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(elapsed).count();
    return result;
}

inline ConvertResult convert_file(const std::filesystem::path& path, const ConvertOptions& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        ConvertResult r;
        r.report.file = path.generic_string();
        r.report.error("cannot read file");
        return r;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return convert_bytes(buf.str(), opts, path.generic_string());
}

// piece.cmme.xml -> piece.cmn.mei / piece.mensural.mei
inline std::string output_filename(const std::filesystem::path& input, Target target) {
    std::string name = input.filename().generic_string();
    const std::string ext = ".cmme.xml";
    if (name.size() > ext.size() && name.substr(name.size() - ext.size()) == ext)
        name = name.substr(0, name.size() - ext.size());
    else if (auto dot = name.rfind('.'); dot != std::string::npos && dot > 0)
        name = name.substr(0, dot);
    return name + (target == Target::Cmn ? ".cmn.mei" : ".mensural.mei");
}

// Cheap root-element sniff for files not named *.cmme.xml.
inline bool sniff_cmme(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    std::string head(512, '\0');
    in.read(head.data(), static_cast<std::streamsize>(head.size()));
    head.resize(static_cast<size_t>(in.gcount()));
    return head.find("<Piece") != std::string::npos;
}

// Recursive discovery: *.cmme.xml by extension plus other *.xml whose root
// element sniffs as a CMME piece. Sorted for determinism.
inline std::vector<std::filesystem::path> discover_inputs(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    if (!std::filesystem::exists(dir)) return out;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string name = entry.path().filename().generic_string();
        if (name.size() > 9 && name.substr(name.size() - 9) == ".cmme.xml") {
            out.push_back(entry.path());
        } else if (name.size() > 4 && name.substr(name.size() - 4) == ".xml" &&
                   sniff_cmme(entry.path())) {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace mensura
