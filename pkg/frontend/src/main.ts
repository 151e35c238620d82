import { ApiClient } from "./api.js";
import { ScreeningController, SessionStorage } from "./controller.js";
import { mount } from "./views.js";

const storage: SessionStorage = {
  get: (key) => window.localStorage.getItem(key),
  set: (key, value) => window.localStorage.setItem(key, value),
  remove: (key) => window.localStorage.removeItem(key),
};

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) {
    throw new Error("missing #app mount point");
  }
  const controller = new ScreeningController(new ApiClient(""), storage);
  mount(root, controller);
  await controller.resume();
}

void boot();
