/**
 * DOM rendering for the screening session.  Views are a pure function of
 * the controller state; all truth lives server-side.
 */

import { SearchHit } from "./api.js";
import { ScreeningController, SessionState } from "./controller.js";

export function mount(root: HTMLElement, controller: ScreeningController): void {
  const render = (state: SessionState) => {
    root.replaceChildren(build(state, controller));
  };
  controller.subscribe(render);
  render(controller.getState());

  document.addEventListener("keydown", (event) => {
    const target = event.target as HTMLElement | null;
    if (target && ["INPUT", "TEXTAREA", "SELECT"].includes(target.tagName)) {
      return;
    }
    controller.handleKey(event.key);
  });
}

function build(state: SessionState, controller: ScreeningController): HTMLElement {
  const page = el("div", "page");
  page.append(header(state));
  if (state.error) {
    page.append(banner(state.error, "error"));
  }
  if (state.notice) {
    page.append(banner(state.notice, "notice"));
  }
  switch (state.phase) {
    case "setup":
      page.append(setupView(state, controller));
      break;
    case "priors":
      page.append(priorsView(state, controller));
      break;
    case "screening":
      page.append(screeningView(state, controller));
      page.append(dashboard(state));
      break;
    case "finished":
      page.append(finishedView(controller));
      page.append(dashboard(state));
      break;
  }
  return page;
}

function header(state: SessionState): HTMLElement {
  const bar = el("header", "topbar");
  bar.append(el("h1", "", "screenloop"));
  if (state.projectName) {
    bar.append(el("span", "project-name", state.projectName));
  }
  return bar;
}

function banner(message: string, kind: "error" | "notice"): HTMLElement {
  return el("div", `banner banner-${kind}`, message);
}

// --- setup wizard -----------------------------------------------------------

function setupView(state: SessionState, controller: ScreeningController): HTMLElement {
  const card = el("section", "card");
  card.append(el("h2", "", "1. Set up your project"));

  const nameRow = el("div", "row");
  const nameInput = el("input") as HTMLInputElement;
  nameInput.placeholder = "project name";
  nameInput.value = state.projectName;
  const nameButton = el("button", "primary", "Create project") as HTMLButtonElement;
  nameButton.disabled = state.projectId !== null;
  nameButton.onclick = () => void controller.startProject(nameInput.value);
  nameRow.append(nameInput, nameButton);
  card.append(nameRow);

  const uploadRow = el("div", "row");
  const fileInput = el("input") as HTMLInputElement;
  fileInput.type = "file";
  fileInput.accept = ".csv,.ris,.txt";
  fileInput.disabled = state.projectId === null;
  const uploadButton = el("button", "primary", "Upload dataset") as HTMLButtonElement;
  uploadButton.disabled = state.projectId === null;
  uploadButton.onclick = async () => {
    const file = fileInput.files?.[0];
    if (!file) {
      return;
    }
    const format = file.name.toLowerCase().endsWith(".ris")
      ? "ris"
      : file.name.toLowerCase().endsWith(".csv")
        ? "csv"
        : undefined;
    await controller.uploadDataset(await file.arrayBuffer(), format);
  };
  uploadRow.append(fileInput, uploadButton);
  card.append(uploadRow);
  card.append(
    el(
      "p",
      "hint",
      "RIS or CSV (UTF-8, comma separated); records need a title or an abstract.",
    ),
  );
  return card;
}

// --- prior selection -----------------------------------------------------------

function priorsView(state: SessionState, controller: ScreeningController): HTMLElement {
  const card = el("section", "card");
  card.append(el("h2", "", "2. Select prior knowledge"));
  if (state.upload) {
    card.append(
      el("p", "hint", `${state.upload.n_records} records loaded. Mark at least one ` +
        "relevant and one irrelevant record to train the first model."),
    );
  }

  const searchRow = el("div", "row");
  const searchInput = el("input") as HTMLInputElement;
  searchInput.placeholder = "search titles and abstracts";
  searchInput.value = state.searchQuery;
  const searchButton = el("button", "", "Search") as HTMLButtonElement;
  searchButton.onclick = () => void controller.searchPriors(searchInput.value);
  searchInput.onkeydown = (event) => {
    if (event.key === "Enter") {
      void controller.searchPriors(searchInput.value);
    }
  };
  searchRow.append(searchInput, searchButton);
  card.append(searchRow);

  if (state.searchHits.length > 0) {
    card.append(hitList(state.searchHits, state.searchQuery, controller));
  }

  const suggestHeading = el("div", "row");
  suggestHeading.append(el("h3", "", "Random records (likely irrelevant)"));
  const refresh = el("button", "", "More suggestions") as HTMLButtonElement;
  refresh.onclick = () => void controller.refreshSuggestions();
  suggestHeading.append(refresh);
  card.append(suggestHeading);
  card.append(hitList(state.suggestions, "", controller));

  card.append(pickSummary(state, controller));

  const submit = el("button", "primary", "Start screening") as HTMLButtonElement;
  submit.disabled = !controller.canSubmitPriors();
  submit.onclick = () => void controller.submitPriors();
  card.append(submit);
  return card;
}

function hitList(
  hits: SearchHit[],
  query: string,
  controller: ScreeningController,
): HTMLElement {
  const list = el("ul", "hits");
  for (const hit of hits) {
    const item = el("li", "hit");
    const title = el("div", "hit-title");
    title.append(...highlight(hit.title, query));
    const snippet = el("div", "hit-snippet");
    snippet.append(...highlight(hit.abstract_snippet, query));
    const actions = el("div", "hit-actions");
    const relevant = el("button", "ok", "relevant") as HTMLButtonElement;
    relevant.onclick = () => controller.pickPrior(hit, true);
    const irrelevant = el("button", "bad", "irrelevant") as HTMLButtonElement;
    irrelevant.onclick = () => controller.pickPrior(hit, false);
    actions.append(relevant, irrelevant);
    item.append(title, snippet, actions);
    list.append(item);
  }
  return list;
}

/** Highlight matching query tokens during prior search only. */
function highlight(text: string, query: string): (HTMLElement | Text)[] {
  const tokens = query
    .toLowerCase()
    .split(/[^\p{L}\p{N}]+/u)
    .filter((t) => t.length > 0);
  if (tokens.length === 0) {
    return [document.createTextNode(text)];
  }
  const out: (HTMLElement | Text)[] = [];
  for (const word of text.split(/(\s+)/)) {
    const bare = word.toLowerCase().replace(/[^\p{L}\p{N}]+/gu, "");
    if (bare && tokens.includes(bare)) {
      out.push(el("mark", "", word));
    } else {
      out.push(document.createTextNode(word));
    }
  }
  return out;
}

function pickSummary(state: SessionState, controller: ScreeningController): HTMLElement {
  const wrap = el("div", "picks");
  const block = (label: string, picks: Map<number, SearchHit>) => {
    const section = el("div", "pick-block");
    section.append(el("h3", "", `${label} (${picks.size})`));
    const list = el("ul");
    for (const [rowId, hit] of picks) {
      const item = el("li", "", hit.title || `record ${rowId}`);
      const remove = el("button", "linkish", "remove") as HTMLButtonElement;
      remove.onclick = () => controller.unpickPrior(rowId);
      item.append(" ", remove);
      list.append(item);
    }
    section.append(list);
    return section;
  };
  wrap.append(block("Relevant picks", state.priorIncluded));
  wrap.append(block("Irrelevant picks", state.priorExcluded));
  return wrap;
}

// --- screening loop -----------------------------------------------------------

function screeningView(state: SessionState, controller: ScreeningController): HTMLElement {
  const card = el("section", "card record-card");
  if (!state.current) {
    card.append(el("p", "", "Waiting for the next record…"));
    return card;
  }
  card.append(el("h2", "record-title", state.current.title || "(no title)"));
  card.append(el("p", "record-abstract", state.current.abstract || "(no abstract)"));

  const actions = el("div", "decide");
  const relevant = el("button", "ok big", "Relevant (R)") as HTMLButtonElement;
  const irrelevant = el("button", "bad big", "Irrelevant (I)") as HTMLButtonElement;
  relevant.disabled = state.decisionPending;
  irrelevant.disabled = state.decisionPending;
  relevant.onclick = () => void controller.decide(1);
  irrelevant.onclick = () => void controller.decide(0);
  actions.append(relevant, irrelevant);
  card.append(actions);

  const undo = el("button", "linkish", "undo last (U)") as HTMLButtonElement;
  undo.onclick = () => controller.undoLast();
  card.append(undo);
  return card;
}

function finishedView(controller: ScreeningController): HTMLElement {
  const card = el("section", "card");
  card.append(el("h2", "", "Pool finished"));
  card.append(
    el("p", "", "Every record is labeled or the stopping rule fired. " +
      "Download the results:"),
  );
  const row = el("div", "row");
  for (const format of ["csv", "ris"] as const) {
    const url = controller.exportUrl(format);
    if (url) {
      const link = el("a", "button-link", `Export ${format.toUpperCase()}`) as HTMLAnchorElement;
      link.href = url;
      link.setAttribute("download", `screenloop-results.${format}`);
      row.append(link);
    }
  }
  card.append(row);
  return card;
}

// --- dashboard -------------------------------------------------------------------

function dashboard(state: SessionState): HTMLElement {
  const card = el("section", "card dashboard");
  card.append(el("h2", "", "Progress"));
  const progress = state.progress;
  if (!progress) {
    card.append(el("p", "hint", "no decisions yet"));
    return card;
  }
  const stats = el("div", "stats");
  stats.append(stat("labeled", `${progress.n_labeled} / ${progress.n_total}`));
  stats.append(stat("relevant", String(progress.n_relevant)));
  stats.append(stat("irrelevant", String(progress.n_irrelevant)));
  stats.append(stat("model", `v${progress.last_model_version}`));
  card.append(stats);
  card.append(windowChart(progress.recall_proxy));

  const exports = el("div", "row");
  exports.append(el("span", "hint", "export current state:"));
  card.append(exports);
  return card;
}

function stat(label: string, value: string): HTMLElement {
  const box = el("div", "stat");
  box.append(el("div", "stat-value", value));
  box.append(el("div", "stat-label", label));
  return box;
}

/** Relevant-per-10-decisions trend as a tiny SVG bar chart. */
function windowChart(windows: number[]): SVGSVGElement {
  const ns = "http://www.w3.org/2000/svg";
  const barWidth = 14;
  const height = 48;
  const svg = document.createElementNS(ns, "svg");
  svg.setAttribute("class", "window-chart");
  svg.setAttribute("width", String(Math.max(windows.length * (barWidth + 2), 60)));
  svg.setAttribute("height", String(height));
  windows.forEach((count, index) => {
    const bar = document.createElementNS(ns, "rect");
    const h = Math.max((count / 10) * height, 1);
    bar.setAttribute("x", String(index * (barWidth + 2)));
    bar.setAttribute("y", String(height - h));
    bar.setAttribute("width", String(barWidth));
    bar.setAttribute("height", String(h));
    bar.setAttribute("class", "window-bar");
    const tip = document.createElementNS(ns, "title");
    tip.textContent = `${count} relevant in decisions ${index * 10 + 1}–${index * 10 + 10}`;
    bar.append(tip);
    svg.append(bar);
  });
  return svg;
}

function el(tag: string, className = "", text = ""): HTMLElement {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text) {
    node.textContent = text;
  }
  return node;
}
