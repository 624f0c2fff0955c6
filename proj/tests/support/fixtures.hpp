#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "recam/corpus.hpp"

namespace recam::testing {

inline const std::string kDaviesPassage =
    "Davies took shot put gold in the F42 class at the Rio Games, setting a Games record, but the discus was not "
    "on the programme there so he could not defend the title he won in 2012. He said he rarely talks about "
    "targets, yet this time he wants gold in both events in front of a home crowd in London next summer.";

inline const std::string kDaviesQuestion =
    "Paralympic champion Aled Sion Davies @placeholder two gold medals at the 2017 World Para Athletics "
    "Championships in London.";

inline Instance davies_instance() {
    Instance inst;
    inst.id = "davies";
    inst.passage = kDaviesPassage;
    inst.question = kDaviesQuestion;
    inst.candidates = {"suffered", "promoted", "remains", "wants", "achieved"};
    inst.gold_index = 3;
    return inst;
}

/// Gold "parts"; a masked-LM tends to prefer "all" or "half".
inline Instance aurora_instance() {
    Instance inst;
    inst.id = "aurora";
    inst.passage = "The Northern Lights were seen over large areas of the country on Sunday night .";
    inst.question = "The Aurora Borealis, better known as the Northern Lights, was spotted across @placeholder of "
                    "England on Sunday.";
    inst.candidates = {"millions", "parts", "half", "isle", "remains"};
    inst.gold_index = 1;
    return inst;
}

/// Gold "scored" is also what an untuned masked-LM predicts.
inline Instance own_goal_instance() {
    Instance inst;
    inst.id = "own-goal";
    inst.passage = "A defender turned the ball into his own net during a lower league match in Switzerland .";
    inst.question = "You won't believe this own goal that was @placeholder in the Swiss lower league !";
    inst.candidates = {"scored", "born", "eliminated", "closed", "beaten"};
    inst.gold_index = 0;
    return inst;
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("recam-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

    std::filesystem::path write(const std::string& name, const std::string& content) const {
        const auto p = path_ / name;
        std::ofstream(p, std::ios::binary) << content;
        return p;
    }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace recam::testing
