/**
 * Rendering: ViewState -> Screen model -> ANSI text. The map is a colored
 * cell raster (unknown dim, regolith plain, rock solid, semantic classes
 * tinted) with entity glyphs overlaid; open emergency prompts render as a
 * modal that outranks every other panel.
 */

import type { EntityView, MapDump } from "./protocol.js";
import { openPrompts, orderedAlerts, type ViewState } from "./view.js";

export interface ModalView {
  caseId: string;
  astronaut: string;
  question: string;
}

export interface Screen {
  header: string;
  banner: string | null;
  mapLines: string[];
  goalLines: string[];
  alertLines: string[];
  trackLines: string[];
  storageLines: string[];
  pendingLines: string[];
  feedLines: string[];
  modal: ModalView | null;
}

const ENTITY_GLYPHS: Record<string, string> = {
  Rover: "R",
  Astronaut: "A",
  SolarPanelArray: "P",
  BaseStation: "B",
  ToolSlot: "T",
  SamplePoint: "s",
};

const SEMANTIC_CELLS: Record<string, string> = {
  A: "a", // astronaut
  K: "#", // rock
  V: "r", // rover
  P: "p", // solar panel
  r: ".", // regolith
  " ": ".", // known free, unlabeled
};

function rasterize(map: MapDump, entities: EntityView[]): string[] {
  const raster: string[][] = map.rows.map((row, i) =>
    row.split("").map((cell, col) => {
      if (cell === "?") return "·"; // middle dot: unexplored
      if (cell === "#") return "#";
      const semantic = map.semantic_rows[i]?.[col] ?? " ";
      return SEMANTIC_CELLS[semantic] ?? ".";
    }),
  );
  for (const entity of entities) {
    const col = Math.floor((entity.x - map.origin.x) / map.resolution);
    const rowFromBottom = Math.floor((entity.y - map.origin.y) / map.resolution);
    const row = map.height - 1 - rowFromBottom;
    if (row >= 0 && row < raster.length && col >= 0 && col < (raster[row]?.length ?? 0)) {
      const glyph = ENTITY_GLYPHS[entity.kind] ?? "?";
      raster[row][col] = entity.posture === "Fallen" ? glyph.toLowerCase() : glyph;
    }
  }
  return raster.map((cells) => cells.join(""));
}

export function render(view: ViewState, feedRows = 8): Screen {
  const header =
    `cisru console | ${view.scenario ?? "-"} | tick ${view.tick} | ${view.connection}` +
    (Object.keys(view.levels).length
      ? " | " +
        Object.entries(view.levels)
          .map(([agent, level]) => `${agent}:${level}`)
          .join(" ")
      : "");

  const goalLines = Object.values(view.goals).map((goal) => {
    const reason = goal.failure_reason ? ` (${goal.failure_reason})` : "";
    return `${goal.goal_id}  ${goal.kind}  ${goal.status}${reason}`;
  });

  const alertLines = orderedAlerts(view).map(
    (alert) => `[${alert.alert_id}] t${alert.tick} ${alert.recipient}: ${alert.reason}`,
  );

  const trackLines = view.tracks.map(
    (track) => `${track.track_id} ${track.cls} (${track.x.toFixed(1)}, ${track.y.toFixed(1)}) ${track.status}`,
  );

  const storageLines = Object.entries(view.storage).map(
    ([agent, slots]) => `${agent}: [${slots.map((s) => s ?? "-").join(", ")}]`,
  );

  const pendingLines = [
    ...view.pending.map((p) => `${p.cmdId} ${String(p.command.kind)} ... awaiting ack`),
    ...view.outcomes.slice(-3).map((o) => {
      const summary = o.ok ? `ok ${JSON.stringify(o.result)}` : `ERROR ${String(o.result.reason)}`;
      return `${o.cmdId} ${summary}`;
    }),
  ];

  const feedLines = view.feed
    .slice(-feedRows)
    .map((record) => `t${record.tick} ${record.source} ${record.type}`);

  const prompts = openPrompts(view);
  const modal: ModalView | null = prompts.length
    ? {
        caseId: prompts[0].case_id,
        astronaut: prompts[0].astronaut,
        question: `Fall detected for ${prompts[0].astronaut}. Are you safe? (answer: safe / emergency)`,
      }
    : null;

  return {
    header,
    banner: view.banner,
    mapLines: view.map ? rasterize(view.map, view.entities) : ["(no map yet)"],
    goalLines,
    alertLines,
    trackLines,
    storageLines,
    pendingLines,
    feedLines,
    modal,
  };
}

const ANSI = {
  reset: "[0m",
  dim: "[2m",
  bold: "[1m",
  red: "[31m",
  yellow: "[33m",
  cyan: "[36m",
  blue: "[34m",
  inverse: "[7m",
};

function colorizeMapLine(line: string): string {
  let out = "";
  for (const ch of line) {
    if (ch === "·") out += `${ANSI.dim}·${ANSI.reset}`;
    else if (ch === "#") out += `${ANSI.red}#${ANSI.reset}`;
    else if (ch === "R" || ch === "r") out += `${ANSI.yellow}${ch}${ANSI.reset}`;
    else if (ch === "A" || ch === "a") out += `${ANSI.cyan}${ch}${ANSI.reset}`;
    else if (ch === "P" || ch === "p") out += `${ANSI.blue}${ch}${ANSI.reset}`;
    else out += ch;
  }
  return out;
}

/** Full-screen ANSI document (clear + repaint). */
export function presentAnsi(screen: Screen, color = true): string {
  const parts: string[] = ["[2J[H"];
  parts.push(color ? ANSI.bold + screen.header + ANSI.reset : screen.header);
  if (screen.banner) parts.push((color ? ANSI.red : "") + `!! ${screen.banner}` + (color ? ANSI.reset : ""));
  parts.push("");
  for (const line of screen.mapLines) parts.push(color ? colorizeMapLine(line) : line);
  parts.push("");
  const section = (title: string, lines: string[]) => {
    parts.push(color ? `${ANSI.bold}${title}${ANSI.reset}` : title);
    parts.push(...(lines.length ? lines : ["  (none)"]).map((l) => `  ${l}`));
  };
  section("goals", screen.goalLines);
  section("alerts", screen.alertLines);
  section("tracks", screen.trackLines);
  section("storage", screen.storageLines);
  section("commands", screen.pendingLines);
  section("events", screen.feedLines);
  if (screen.modal) {
    const box = [
      "+------------------------------------------------------------+",
      `| EMERGENCY PROMPT ${screen.modal.caseId.padEnd(43)}|`,
      `| ${screen.modal.question.padEnd(59)}|`,
      "+------------------------------------------------------------+",
    ];
    parts.push("", ...box.map((l) => (color ? ANSI.inverse + l + ANSI.reset : l)));
  }
  return parts.join("\n") + "\n";
}
