// Serves a fixed judge verdict on /v1/chat/completions for manual runs of
// `prefalign judge --judge remote`.
#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "fake_judge_server.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Fake chat-completion judge"};
  std::string reply =
      "Aesthetic Quality: 30\nStructural Coherence: 25\nSemantic Alignment: 20\nTotal: 75";
  app.add_option("--reply", reply, "assistant message returned for every request");
  CLI11_PARSE(app, argc, argv);

  FakeJudgeServer server(reply);
  std::cout << server.url() << std::endl;
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  int sig = 0;
  sigwait(&set, &sig);
  return 0;
}
