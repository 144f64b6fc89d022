#include <cstdio>

int main() {
  std::puts("cyclet: subcommands not wired yet");
  return 1;
}
