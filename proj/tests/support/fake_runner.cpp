// Minimal coverage runner for tests. It speaks the framed protocol but never
// executes Python: coverage comes from marker comments in each test.
//
//   # covers: 1 2 5     executable line ids hit by the test
//   # branches: 1 3     branch arm ids taken
//   # fail              exec_ok = false
//   # syntax-error      syntax_ok = false
//   # hang              stop answering
//   # crash             exit immediately
//
// total_lines counts the program's non-blank, non-comment lines;
// total_branches comes from a "# total-branches: N" line in the program.

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragvv/coverage_protocol.hpp"

using nlohmann::json;
namespace proto = ragvv::runner;

namespace {

bool write_all(const std::string& bytes) {
    std::size_t done = 0;
    while (done < bytes.size()) {
        const auto n = ::write(STDOUT_FILENO, bytes.data() + done, bytes.size() - done);
        if (n <= 0) return false;
        done += static_cast<std::size_t>(n);
    }
    return true;
}

std::vector<int> ids_after(const std::string& code, const std::string& marker) {
    std::vector<int> ids;
    const auto at = code.find(marker);
    if (at == std::string::npos) return ids;
    auto end = code.find('\n', at);
    std::string rest = code.substr(at + marker.size(), end == std::string::npos ? std::string::npos : end - at - marker.size());
    for (char& c : rest) {
        if (c == ',') c = ' ';
    }
    std::istringstream in(rest);
    int id = 0;
    while (in >> id) ids.push_back(id);
    return ids;
}

int count_lines(const std::string& program) {
    std::istringstream in(program);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        const auto b = line.find_first_not_of(" \t\r");
        if (b != std::string::npos && line[b] != '#') ++n;
    }
    return n;
}

int total_branches(const std::string& program) {
    const auto ids = ids_after(program, "# total-branches:");
    return ids.empty() ? 0 : ids.front();
}

json evaluate(const json& req) {
    const auto program = req.at("program_source").get<std::string>();
    json out{{"task_id", req.at("task_id")},
             {"total_lines", count_lines(program)},
             {"total_branches", total_branches(program)},
             {"runner_version", "fake-1"},
             {"per_test", json::array()}};
    for (const auto& t : req.at("tests")) {
        const auto code = t.at("code").get<std::string>();
        if (code.find("# crash") != std::string::npos) std::_Exit(3);
        if (code.find("# hang") != std::string::npos) {
            for (;;) std::this_thread::sleep_for(std::chrono::seconds(60));
        }
        const bool syntax = code.find("# syntax-error") == std::string::npos;
        const bool exec = syntax && code.find("# fail") == std::string::npos;
        json r{{"index", t.at("index")}, {"syntax_ok", syntax}, {"exec_ok", exec}};
        r["covered_lines"] = syntax ? ids_after(code, "# covers:") : std::vector<int>{};
        r["covered_branches"] = syntax ? ids_after(code, "# branches:") : std::vector<int>{};
        out["per_test"].push_back(std::move(r));
    }
    return out;
}

int self_test(bool broken) {
    const std::string program = "def f(x):\n    # total-branches: 2\n    if x:\n        return 1\n    return 0\n";
    const json req{{"task_id", "selftest"},
                   {"program_source", program},
                   {"tests", json::array({{{"index", 0}, {"code", "assert f(1) == 1  # covers: 1 2 3\n# branches: 1\n"}},
                                          {{"index", 1}, {"code", "assert f(0) == 0  # covers: 1 2 4\n# branches: 2\n"}}})}};
    const auto res = evaluate(req);
    for (const auto& t : res["per_test"]) {
        std::cout << "test " << t["index"] << " lines " << t["covered_lines"].dump() << " branches "
                  << t["covered_branches"].dump() << "\n";
    }
    if (broken) {
        std::cout << "expected lines [1,2,4] for test 0\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    bool broken = false;
    bool bad_proto = false;
    bool silent = false;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--broken") broken = true;
        if (a == "--bad-proto") bad_proto = true;
        if (a == "--silent") silent = true;
        if (a == "--self-test") return self_test(broken);
    }
    if (silent) {
        for (;;) std::this_thread::sleep_for(std::chrono::seconds(60));
    }

    proto::FrameDecoder decoder;
    bool greeted = false;
    char buf[65536];
    for (;;) {
        const auto n = ::read(STDIN_FILENO, buf, sizeof(buf));
        if (n <= 0) return 0;
        decoder.feed(std::string_view(buf, static_cast<std::size_t>(n)));
        for (;;) {
            std::optional<std::string> frame;
            try {
                frame = decoder.next();
            } catch (const std::exception& e) {
                write_all(proto::encode_frame(json{{"error", e.what()}}));
                return 2;
            }
            if (!frame) break;
            json reply;
            try {
                const auto req = json::parse(*frame);
                if (!greeted) {
                    reply = {{"proto", bad_proto ? 2 : proto::kProtocolVersion}, {"runner_version", "fake-1"}};
                    greeted = true;
                } else {
                    reply = evaluate(req);
                }
            } catch (const std::exception& e) {
                reply = {{"error", std::string("bad request: ") + e.what()}};
            }
            if (!write_all(proto::encode_frame(reply))) return 0;
        }
    }
}
