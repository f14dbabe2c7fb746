/**
 * Terminal entry point: `node dist/main.js --host 127.0.0.1 --port 8700`.
 * Frames repaint the screen; a readline prompt at the bottom takes operator
 * commands (see `help`).
 */

import * as readline from "node:readline";

import { ConsoleSession, runCommandLine } from "./console.js";
import { presentAnsi, render } from "./render.js";

function parseArgs(argv: string[]): { host: string; port: number } {
  let host = "127.0.0.1";
  let port = 8700;
  for (let i = 0; i < argv.length; i += 1) {
    if (argv[i] === "--host") host = argv[i + 1];
    if (argv[i] === "--port") port = Number(argv[i + 1]);
  }
  return { host, port };
}

const { host, port } = parseArgs(process.argv.slice(2));

let lastMessage = "";
let repaintQueued = false;

const session = new ConsoleSession({
  host,
  port,
  onChange: () => {
    if (repaintQueued) return;
    repaintQueued = true;
    setTimeout(() => {
      repaintQueued = false;
      repaint();
    }, 100);
  },
});

const rl = readline.createInterface({ input: process.stdin, output: process.stdout });

function repaint(): void {
  const screen = render(session.view);
  process.stdout.write(presentAnsi(screen, process.stdout.isTTY === true));
  if (lastMessage) process.stdout.write(`> ${lastMessage}\n`);
  rl.prompt(true);
}

rl.setPrompt("console> ");
rl.on("line", (line) => {
  if (line.trim() === "quit" || line.trim() === "exit") {
    session.close();
    rl.close();
    process.exit(0);
  }
  lastMessage = runCommandLine(session, line);
  repaint();
});
rl.on("close", () => {
  session.close();
  process.exit(0);
});

session.connect();
repaint();
