// Command-line front end. Subcommands land here as the library layers come up.
#include <cstdio>

int main() {
  std::fprintf(stderr, "pgmtool: no subcommand given\n");
  return 3;
}
